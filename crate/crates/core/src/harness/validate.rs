//! URL validation: a bounded worker pool over distinct URLs.

use std::collections::HashMap;
use std::fmt;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;
use std::time::Duration;

use serde::Deserialize;

use super::memorization::UrlRecord;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum UrlStatus {
    Http(u16),
    Timeout,
    Error(String),
}

impl UrlStatus {
    /// A URL is valid when it answers with a status below 400.
    pub fn is_valid(&self) -> bool {
        matches!(self, UrlStatus::Http(code) if *code < 400)
    }
}

impl fmt::Display for UrlStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            UrlStatus::Http(c) => write!(f, "{c}"),
            UrlStatus::Timeout => f.write_str("timeout"),
            UrlStatus::Error(_) => f.write_str("error"),
        }
    }
}

pub trait UrlValidator: Send + Sync {
    fn check(&self, url: &str) -> UrlStatus;
}

/// Fills `status`, `valid` and `duplicate` on every record. Each distinct
/// URL is checked once, with at most `max_concurrency` checks in flight.
pub fn validate_urls(records: &mut [UrlRecord], validator: &dyn UrlValidator, max_concurrency: usize) {
    let mut distinct: Vec<&str> = Vec::new();
    let mut index: HashMap<&str, usize> = HashMap::new();
    for r in records.iter() {
        if !index.contains_key(r.url.as_str()) {
            index.insert(r.url.as_str(), distinct.len());
            distinct.push(r.url.as_str());
        }
    }

    let results: Vec<Mutex<Option<UrlStatus>>> = distinct.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let workers = max_concurrency.max(1).min(distinct.len().max(1));
    thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(url) = distinct.get(i) else { break };
                let status = validator.check(url);
                *results[i].lock().unwrap() = Some(status);
            });
        }
    });

    let statuses: Vec<UrlStatus> = results
        .into_iter()
        .map(|m| m.into_inner().unwrap().expect("every url checked"))
        .collect();
    let slots: Vec<usize> = records.iter().map(|r| index[r.url.as_str()]).collect();
    for (r, slot) in records.iter_mut().zip(slots) {
        let status = statuses[slot].clone();
        r.valid = status.is_valid();
        r.status = Some(status);
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(untagged)]
pub enum MockStatus {
    Code(u16),
    Named(MockNamed),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MockNamed {
    Timeout,
    Error,
}

impl MockStatus {
    fn to_status(self) -> UrlStatus {
        match self {
            MockStatus::Code(c) => UrlStatus::Http(c),
            MockStatus::Named(MockNamed::Timeout) => UrlStatus::Timeout,
            MockStatus::Named(MockNamed::Error) => UrlStatus::Error("mock error".into()),
        }
    }
}

/// Table-driven validator that also records call counts and peak concurrency.
#[derive(Debug)]
pub struct MockValidator {
    table: HashMap<String, UrlStatus>,
    default: UrlStatus,
    delay: Duration,
    in_flight: AtomicUsize,
    peak: AtomicUsize,
    calls: Mutex<HashMap<String, usize>>,
}

impl MockValidator {
    pub fn new(table: HashMap<String, UrlStatus>, default: UrlStatus) -> Self {
        MockValidator {
            table,
            default,
            delay: Duration::ZERO,
            in_flight: AtomicUsize::new(0),
            peak: AtomicUsize::new(0),
            calls: Mutex::new(HashMap::new()),
        }
    }

    pub fn from_config(statuses: &HashMap<String, MockStatus>, default: MockStatus) -> Self {
        let table = statuses.iter().map(|(k, v)| (k.clone(), v.to_status())).collect();
        Self::new(table, default.to_status())
    }

    /// Each check sleeps this long, to make overlap observable.
    pub fn with_delay(mut self, delay: Duration) -> Self {
        self.delay = delay;
        self
    }

    pub fn peak_in_flight(&self) -> usize {
        self.peak.load(Ordering::SeqCst)
    }

    pub fn calls_for(&self, url: &str) -> usize {
        self.calls.lock().unwrap().get(url).copied().unwrap_or(0)
    }

    pub fn total_calls(&self) -> usize {
        self.calls.lock().unwrap().values().sum()
    }
}

impl UrlValidator for MockValidator {
    fn check(&self, url: &str) -> UrlStatus {
        let now = self.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
        self.peak.fetch_max(now, Ordering::SeqCst);
        *self.calls.lock().unwrap().entry(url.to_string()).or_default() += 1;
        if !self.delay.is_zero() {
            thread::sleep(self.delay);
        }
        let status = self.table.get(url).cloned().unwrap_or_else(|| self.default.clone());
        self.in_flight.fetch_sub(1, Ordering::SeqCst);
        status
    }
}

/// Single HTTP GET per URL. Redirects are not followed, so a 3xx counts as valid.
#[derive(Debug)]
pub struct LiveValidator {
    agent: ureq::Agent,
}

pub const DEFAULT_USER_AGENT: &str = concat!("lmquery-url-validator/", env!("CARGO_PKG_VERSION"));

impl LiveValidator {
    pub fn new(timeout: Duration, user_agent: &str) -> Self {
        let agent = ureq::AgentBuilder::new()
            .timeout(timeout)
            .redirects(0)
            .user_agent(user_agent)
            .build();
        LiveValidator { agent }
    }
}

impl UrlValidator for LiveValidator {
    fn check(&self, url: &str) -> UrlStatus {
        match self.agent.get(url).call() {
            Ok(resp) => UrlStatus::Http(resp.status()),
            Err(ureq::Error::Status(code, _)) => UrlStatus::Http(code),
            Err(ureq::Error::Transport(t)) => {
                let msg = t.to_string();
                if msg.contains("timed out") || msg.contains("Timeout") {
                    UrlStatus::Timeout
                } else {
                    UrlStatus::Error(msg)
                }
            }
        }
    }
}
