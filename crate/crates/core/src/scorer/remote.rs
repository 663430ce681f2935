//! HTTP client for a remote scorer.
//!
//! Protocol: `GET /v1/vocab` returns a vocabulary file; `POST /v1/logprobs`
//! with `{"tokens": [...]}` returns `{"logprobs": [...]}` of length |V|.

use std::io::Read as _;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{logsumexp, Scorer, ScorerError};
use crate::vocab::{TokenId, Vocabulary};

/// Responses whose logsumexp is within this distance of 0 are renormalized
/// locally; anything further off is rejected.
pub const MAX_DRIFT: f64 = 1e-3;

#[derive(Serialize)]
struct LogprobsRequest<'a> {
    tokens: &'a [TokenId],
}

#[derive(Deserialize)]
struct LogprobsResponse {
    logprobs: Vec<f64>,
}

/// Thread-safe client; `ureq::Agent` pools connections internally.
#[derive(Clone, Debug)]
pub struct RemoteScorer {
    agent: ureq::Agent,
    base: String,
    vocab_size: usize,
}

impl RemoteScorer {
    /// Fetches the vocabulary and returns a scorer sized to it.
    pub fn connect(base_url: &str) -> Result<(Self, Vocabulary), ScorerError> {
        let agent = ureq::AgentBuilder::new().timeout(Duration::from_secs(120)).build();
        let base = base_url.trim_end_matches('/').to_string();
        let resp = agent
            .get(&format!("{base}/v1/vocab"))
            .call()
            .map_err(|e| ScorerError::Transport(e.to_string()))?;
        let mut body = Vec::new();
        resp.into_reader()
            .read_to_end(&mut body)
            .map_err(|e| ScorerError::Transport(e.to_string()))?;
        let vocab = Vocabulary::read(&body[..])
            .map_err(|e| ScorerError::Transport(format!("bad vocabulary from server: {e}")))?;
        Ok((RemoteScorer { agent, base, vocab_size: vocab.size() }, vocab))
    }

    /// A client for a server whose vocabulary size is already known.
    pub fn with_vocab_size(base_url: &str, vocab_size: usize) -> Self {
        RemoteScorer {
            agent: ureq::AgentBuilder::new().timeout(Duration::from_secs(120)).build(),
            base: base_url.trim_end_matches('/').to_string(),
            vocab_size,
        }
    }
}

impl Scorer for RemoteScorer {
    fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    fn next_logprobs(&self, prefix: &[TokenId]) -> Result<Vec<f64>, ScorerError> {
        fetch(&self.agent, &self.base, prefix, self.vocab_size)
    }
}

/// One-shot request against `endpoint` (the server base URL).
pub fn remote_next_logprobs(
    endpoint: &str,
    prefix: &[TokenId],
    vocab_size: usize,
) -> Result<Vec<f64>, ScorerError> {
    fetch(&ureq::agent(), endpoint.trim_end_matches('/'), prefix, vocab_size)
}

fn fetch(agent: &ureq::Agent, base: &str, prefix: &[TokenId], vocab_size: usize) -> Result<Vec<f64>, ScorerError> {
    let resp: LogprobsResponse = agent
        .post(&format!("{base}/v1/logprobs"))
        .send_json(LogprobsRequest { tokens: prefix })
        .map_err(|e| ScorerError::Transport(e.to_string()))?
        .into_json()
        .map_err(|e| ScorerError::Transport(format!("bad response body: {e}")))?;
    let mut lp = resp.logprobs;
    if lp.len() != vocab_size {
        return Err(ScorerError::ShapeMismatch { expected: vocab_size, found: lp.len() });
    }
    let z = logsumexp(&lp);
    if !z.is_finite() || z.abs() > MAX_DRIFT {
        return Err(ScorerError::Normalization { logsumexp: z });
    }
    if z != 0.0 {
        lp.iter_mut().for_each(|x| *x -= z);
    }
    Ok(lp)
}
