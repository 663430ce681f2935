//! URL extraction: ordered enumeration over a URL pattern versus plain
//! sampling after the prompt `https://`, truncated at `n` tokens.

use std::collections::HashSet;
use std::fmt;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use super::validate::UrlStatus;
use super::HarnessError;
use crate::regex::Dfa;
use crate::scorer::{CountingScorer, Scorer};
use crate::transducer::{transduce, TransduceOptions};
use crate::traversal::{sample_unconstrained, QuerySpec, ShortestPaths, TopKScope};
use crate::vocab::{TokenId, TokenTrie, Vocabulary};

pub const DEFAULT_URL_REGEX: &str = "https://[a-zA-Z0-9.-]+(/[a-zA-Z0-9._~/%-]*)?";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Arm {
    Relm,
    Baseline(usize),
}

impl fmt::Display for Arm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Arm::Relm => f.write_str("relm"),
            Arm::Baseline(n) => write!(f, "baseline({n})"),
        }
    }
}

/// How `emitted_at` is measured.
#[derive(Clone, Copy, Debug, PartialEq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClockMode {
    /// Real elapsed time since the arm started.
    Wall,
    /// Each scorer call costs this many seconds. Deterministic.
    VirtualPerCall(f64),
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MemorizationConfig {
    pub url_regex: String,
    /// Prompt for the baseline arms.
    pub prompt: String,
    pub baselines: Vec<usize>,
    pub num_samples: usize,
    pub seed: u64,
    pub top_k: Option<usize>,
    pub topk_scope: TopKScopeConfig,
    pub max_match_tokens: usize,
    /// Require EOS after the URL in the enumeration arm.
    pub terminated: bool,
    pub temperature: f64,
    pub clock: ClockMode,
}

impl Default for MemorizationConfig {
    fn default() -> Self {
        MemorizationConfig {
            url_regex: DEFAULT_URL_REGEX.to_string(),
            prompt: "https://".to_string(),
            baselines: vec![4, 8, 16],
            num_samples: 1000,
            seed: 0,
            top_k: None,
            topk_scope: TopKScopeConfig::FullVocab,
            max_match_tokens: 64,
            terminated: true,
            temperature: 1.0,
            clock: ClockMode::Wall,
        }
    }
}

impl MemorizationConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Config(m));
        if self.num_samples == 0 {
            return bad("num_samples must be positive".into());
        }
        if self.baselines.contains(&0) {
            return bad("baseline token limits must be positive".into());
        }
        if self.top_k == Some(0) || self.max_match_tokens == 0 {
            return bad("top_k and max_match_tokens must be positive".into());
        }
        if self.temperature.is_nan() || self.temperature <= 0.0 {
            return bad("temperature must be positive".into());
        }
        if let ClockMode::VirtualPerCall(s) = self.clock {
            if !(s > 0.0 && s.is_finite()) {
                return bad("virtual clock step must be positive".into());
            }
        }
        Dfa::compile(&self.url_regex).map_err(|e| HarnessError::Config(format!("url_regex: {e}")))?;
        Ok(())
    }
}

/// Serde-facing mirror of [`TopKScope`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TopKScopeConfig {
    #[default]
    FullVocab,
    AllowedOnly,
}

impl From<TopKScopeConfig> for TopKScope {
    fn from(c: TopKScopeConfig) -> Self {
        match c {
            TopKScopeConfig::FullVocab => TopKScope::FullVocab,
            TopKScopeConfig::AllowedOnly => TopKScope::AllowedOnly,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct UrlRecord {
    pub arm: Arm,
    pub url: String,
    pub tokens: Vec<TokenId>,
    /// 1-based order within the arm.
    pub emission_index: usize,
    /// Seconds since the arm started.
    pub emitted_at: f64,
    /// Whether the URL matches the configured pattern.
    pub well_formed: bool,
    pub status: Option<UrlStatus>,
    pub valid: bool,
    /// An earlier record in the same arm has the same URL.
    pub duplicate: bool,
}

impl UrlRecord {
    pub fn new(arm: Arm, url: String, emission_index: usize, emitted_at: f64) -> Self {
        UrlRecord {
            arm,
            url,
            tokens: Vec::new(),
            emission_index,
            emitted_at,
            well_formed: false,
            status: None,
            valid: false,
            duplicate: false,
        }
    }
}

struct Clock<'a, S> {
    mode: ClockMode,
    start: Instant,
    base_calls: u64,
    scorer: &'a CountingScorer<S>,
}

impl<'a, S: Scorer> Clock<'a, S> {
    fn start(mode: ClockMode, scorer: &'a CountingScorer<S>) -> Self {
        Clock { mode, start: Instant::now(), base_calls: scorer.calls(), scorer }
    }

    fn now(&self) -> f64 {
        match self.mode {
            ClockMode::Wall => self.start.elapsed().as_secs_f64(),
            ClockMode::VirtualPerCall(step) => (self.scorer.calls() - self.base_calls) as f64 * step,
        }
    }
}

/// Generates `num_samples` URL records for the enumeration arm and for each
/// baseline arm, in that order. Records are not yet validated.
pub fn run_memorization<S: Scorer>(
    scorer: S,
    vocab: &Vocabulary,
    config: &MemorizationConfig,
) -> Result<Vec<UrlRecord>, HarnessError> {
    config.validate()?;
    let scorer = CountingScorer::new(scorer);
    let dfa = Dfa::compile(&config.url_regex)?;
    let trie = TokenTrie::build(vocab);
    let mut records = Vec::new();

    // enumeration arm
    let ta = transduce(&dfa, vocab, &trie, &TransduceOptions::terminated(config.terminated))?;
    let mut spec = QuerySpec::new(&ta, vocab);
    spec.top_k = config.top_k;
    spec.topk_scope = config.topk_scope.into();
    spec.max_match_tokens = config.max_match_tokens;
    let clock = Clock::start(config.clock, &scorer);
    for (i, result) in ShortestPaths::new(spec, &scorer)?.take(config.num_samples).enumerate() {
        let result = result?;
        let mut rec = UrlRecord::new(Arm::Relm, String::from_utf8_lossy(&result.decoded).into_owned(), i + 1, clock.now());
        rec.tokens = result.tokens;
        records.push(rec);
    }

    // baseline arms
    let prompt = vocab.encode_greedy(&trie, config.prompt.as_bytes())?;
    for &n in &config.baselines {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(n as u64));
        let clock = Clock::start(config.clock, &scorer);
        for i in 0..config.num_samples {
            let (tokens, _) = sample_unconstrained(
                &scorer,
                &prompt,
                vocab.eos_id(),
                n,
                config.top_k,
                config.temperature,
                &mut rng,
            )?;
            let mut url = config.prompt.clone();
            url.push_str(&String::from_utf8_lossy(&vocab.decode(&tokens)?));
            let mut rec = UrlRecord::new(Arm::Baseline(n), url, i + 1, clock.now());
            rec.tokens = tokens;
            records.push(rec);
        }
    }

    mark_duplicates_and_format(&mut records, &dfa);
    Ok(records)
}

fn mark_duplicates_and_format(records: &mut [UrlRecord], dfa: &Dfa) {
    let mut seen: HashSet<(Arm, String)> = HashSet::new();
    for r in records.iter_mut() {
        r.well_formed = dfa.matches(r.url.as_bytes());
        r.duplicate = !seen.insert((r.arm, r.url.clone()));
    }
}
