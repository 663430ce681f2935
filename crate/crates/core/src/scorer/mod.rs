//! Next-token log-probability sources.
//!
//! All log-probabilities are natural logs in `f64`. A scorer is conditioned
//! on the full token prefix, including any prompt tokens.

mod fixture;
mod ngram;
mod remote;

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use thiserror::Error;

use crate::vocab::TokenId;

pub use fixture::{Distribution, FixtureFile, FixtureScorer};
pub use ngram::{load_corpus, NGramModel, BEGIN_MARKER};
pub use remote::{remote_next_logprobs, RemoteScorer, MAX_DRIFT};

#[derive(Debug, Error)]
pub enum ScorerError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("expected {expected} log-probabilities, got {found}")]
    ShapeMismatch { expected: usize, found: usize },
    #[error("log-probabilities are not normalized (logsumexp = {logsumexp})")]
    Normalization { logsumexp: f64 },
    #[error("token id {id} outside a vocabulary of size {vocab_size}")]
    InvalidToken { id: TokenId, vocab_size: usize },
    #[error("invalid scorer input: {0}")]
    Invalid(String),
}

/// A language model seen as a function from token prefix to a normalized
/// log-distribution over the vocabulary.
pub trait Scorer: Send + Sync {
    fn vocab_size(&self) -> usize;

    /// Log-probabilities of every next token given `prefix`. The result has
    /// length `vocab_size()` and logsumexp 0.
    fn next_logprobs(&self, prefix: &[TokenId]) -> Result<Vec<f64>, ScorerError>;
}

impl<S: Scorer + ?Sized> Scorer for &S {
    fn vocab_size(&self) -> usize {
        (**self).vocab_size()
    }

    fn next_logprobs(&self, prefix: &[TokenId]) -> Result<Vec<f64>, ScorerError> {
        (**self).next_logprobs(prefix)
    }
}

impl<S: Scorer + ?Sized> Scorer for Box<S> {
    fn vocab_size(&self) -> usize {
        (**self).vocab_size()
    }

    fn next_logprobs(&self, prefix: &[TokenId]) -> Result<Vec<f64>, ScorerError> {
        (**self).next_logprobs(prefix)
    }
}

impl<S: Scorer + ?Sized> Scorer for Arc<S> {
    fn vocab_size(&self) -> usize {
        (**self).vocab_size()
    }

    fn next_logprobs(&self, prefix: &[TokenId]) -> Result<Vec<f64>, ScorerError> {
        (**self).next_logprobs(prefix)
    }
}

/// Same probability for every token.
#[derive(Clone, Copy, Debug)]
pub struct UniformScorer {
    vocab_size: usize,
}

impl UniformScorer {
    pub fn new(vocab_size: usize) -> Self {
        assert!(vocab_size >= 1, "vocabulary must be non-empty");
        UniformScorer { vocab_size }
    }
}

impl Scorer for UniformScorer {
    fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    fn next_logprobs(&self, _prefix: &[TokenId]) -> Result<Vec<f64>, ScorerError> {
        Ok(uniform_logprobs(self.vocab_size))
    }
}

pub fn uniform_logprobs(vocab_size: usize) -> Vec<f64> {
    vec![-(vocab_size as f64).ln(); vocab_size]
}

/// Wraps a scorer and counts calls; the memorization harness uses this as
/// its virtual clock.
#[derive(Debug)]
pub struct CountingScorer<S> {
    inner: S,
    calls: AtomicU64,
}

impl<S: Scorer> CountingScorer<S> {
    pub fn new(inner: S) -> Self {
        CountingScorer { inner, calls: AtomicU64::new(0) }
    }

    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }
}

impl<S: Scorer> Scorer for CountingScorer<S> {
    fn vocab_size(&self) -> usize {
        self.inner.vocab_size()
    }

    fn next_logprobs(&self, prefix: &[TokenId]) -> Result<Vec<f64>, ScorerError> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        self.inner.next_logprobs(prefix)
    }
}

pub fn logsumexp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Orders ids by descending log-probability, lower id first on ties.
fn rank_cmp(logprobs: &[f64], a: TokenId, b: TokenId) -> std::cmp::Ordering {
    logprobs[b as usize].total_cmp(&logprobs[a as usize]).then(a.cmp(&b))
}

/// The `min(k, |V|)` most probable ids, ascending by id. Ties prefer the lower id.
pub fn top_k_set(logprobs: &[f64], k: usize) -> Vec<TokenId> {
    let mut ids = top_k_among(logprobs, (0..logprobs.len() as TokenId).collect(), k);
    ids.sort_unstable();
    ids
}

/// The `k` best of `candidates` by the same ordering, best first.
pub fn top_k_among(logprobs: &[f64], mut candidates: Vec<TokenId>, k: usize) -> Vec<TokenId> {
    if k == 0 {
        return Vec::new();
    }
    if k < candidates.len() {
        candidates.select_nth_unstable_by(k - 1, |&a, &b| rank_cmp(logprobs, a, b));
        candidates.truncate(k);
    }
    candidates.sort_unstable_by(|&a, &b| rank_cmp(logprobs, a, b));
    candidates
}

/// Rescales a log-distribution by `1/temperature` and renormalizes.
pub fn apply_temperature(logprobs: &[f64], temperature: f64) -> Vec<f64> {
    if temperature == 1.0 {
        return logprobs.to_vec();
    }
    let scaled: Vec<f64> = logprobs.iter().map(|&x| x / temperature).collect();
    let z = logsumexp(&scaled);
    scaled.into_iter().map(|x| x - z).collect()
}

pub(crate) fn check_normalized(logprobs: &[f64], tol: f64) -> Result<(), ScorerError> {
    let z = logsumexp(logprobs);
    if z.is_finite() && z.abs() <= tol {
        Ok(())
    } else {
        Err(ScorerError::Normalization { logsumexp: z })
    }
}
