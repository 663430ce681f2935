//! Walking a token automaton under a scorer.
//!
//! Two modes: [`ShortestPaths`] enumerates accepted token sequences in order
//! of decreasing probability (Dijkstra over the tree of token prefixes with
//! edge cost `-ln p(t | prompt, prefix)`), and [`sample`] draws accepted
//! sequences at random with the model's probabilities renormalized over the
//! tokens the automaton allows.

mod sample;
mod shortest;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine as _;
use serde::Serialize;
use thiserror::Error;

use crate::scorer::{top_k_among, top_k_set, ScorerError};
use crate::transducer::TokenAutomaton;
use crate::vocab::{TokenId, VocabError, Vocabulary};

pub use sample::{sample, sample_unconstrained, SampleOutcome, DEFAULT_MAX_RETRIES};
pub use shortest::{enumerate_shortest, ShortestPaths};

pub const DEFAULT_MAX_MATCH_TOKENS: usize = 64;

#[derive(Debug, Error)]
pub enum TraversalError {
    #[error(transparent)]
    Scorer(#[from] ScorerError),
    #[error(transparent)]
    Vocab(#[from] VocabError),
    #[error("invalid query: {0}")]
    InvalidQuery(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Prompt {
    Fixed(Vec<TokenId>),
    /// One prompt drawn uniformly per sample.
    UniformChoice(Vec<Vec<TokenId>>),
}

impl Default for Prompt {
    fn default() -> Self {
        Prompt::Fixed(Vec::new())
    }
}

/// Where top-k is applied.
///
/// `FullVocab` ranks the whole vocabulary and then intersects with the
/// automaton's edges, so a required token outside the model's top k is
/// unreachable. `AllowedOnly` ranks only the edges leaving the current
/// state and never dead-ends.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum TopKScope {
    #[default]
    FullVocab,
    AllowedOnly,
}

#[derive(Clone, Debug)]
pub struct QuerySpec<'a> {
    pub automaton: &'a TokenAutomaton,
    pub vocab: &'a Vocabulary,
    pub prompt: Prompt,
    /// `None` means unlimited.
    pub top_k: Option<usize>,
    pub topk_scope: TopKScope,
    pub max_match_tokens: usize,
    pub seed: u64,
    /// Sampling temperature; enumeration always uses raw probabilities.
    pub temperature: f64,
    /// Attempts per sample before recording a dead end.
    pub max_retries: usize,
}

impl<'a> QuerySpec<'a> {
    pub fn new(automaton: &'a TokenAutomaton, vocab: &'a Vocabulary) -> Self {
        QuerySpec {
            automaton,
            vocab,
            prompt: Prompt::default(),
            top_k: None,
            topk_scope: TopKScope::default(),
            max_match_tokens: DEFAULT_MAX_MATCH_TOKENS,
            seed: 0,
            temperature: 1.0,
            max_retries: DEFAULT_MAX_RETRIES,
        }
    }

    pub fn validate(&self) -> Result<(), TraversalError> {
        let bad = |m: &str| Err(TraversalError::InvalidQuery(m.into()));
        if self.max_match_tokens < 1 {
            return bad("max_match_tokens must be at least 1");
        }
        if self.top_k == Some(0) {
            return bad("top_k must be at least 1");
        }
        if let Prompt::UniformChoice(choices) = &self.prompt {
            if choices.is_empty() {
                return bad("uniform-choice prompt set is empty");
            }
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return bad("temperature must be positive");
        }
        if self.max_retries < 1 {
            return bad("max_retries must be at least 1");
        }
        if self.automaton.eos_id() != self.vocab.eos_id() {
            return bad("automaton and vocabulary disagree on the EOS id");
        }
        Ok(())
    }

    /// Edges from `state` that survive top-k filtering under `logprobs`,
    /// in token order, excluding zero-probability tokens.
    pub(crate) fn allowed_edges(&self, state: u32, logprobs: &[f64]) -> Vec<(TokenId, u32)> {
        let edges = self.automaton.edges(state);
        let finite = |t: TokenId| logprobs[t as usize] > f64::NEG_INFINITY;
        let mut out: Vec<(TokenId, u32)> = match (self.top_k, self.topk_scope) {
            (None, _) => edges.to_vec(),
            (Some(k), TopKScope::FullVocab) => {
                let keep = top_k_set(logprobs, k);
                edges.iter().copied().filter(|(t, _)| keep.binary_search(t).is_ok()).collect()
            }
            (Some(k), TopKScope::AllowedOnly) => {
                let picked = top_k_among(logprobs, edges.iter().map(|e| e.0).collect(), k);
                edges.iter().copied().filter(|(t, _)| picked.contains(t)).collect()
            }
        };
        out.retain(|&(t, _)| finite(t));
        out
    }
}

pub(crate) fn check_shape(logprobs: &[f64], vocab: &Vocabulary) -> Result<(), ScorerError> {
    if logprobs.len() != vocab.size() {
        return Err(ScorerError::ShapeMismatch { expected: vocab.size(), found: logprobs.len() });
    }
    Ok(())
}

/// One accepted token sequence.
#[derive(Clone, Debug, PartialEq)]
pub struct MatchResult {
    pub tokens: Vec<TokenId>,
    pub decoded: Vec<u8>,
    /// Sum of the model's log-probabilities of `tokens` given the prompt.
    pub logprob: f64,
    /// 1-based emission order.
    pub rank: usize,
}

#[derive(Serialize)]
struct MatchLine<'a> {
    rank: usize,
    tokens: &'a [TokenId],
    decoded_b64: String,
    /// Lossy UTF-8 rendering, for reading only.
    text: String,
    logprob: f64,
}

impl MatchResult {
    /// `{"rank":..,"tokens":[..],"decoded_b64":"..","text":"..","logprob":..}`
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(&MatchLine {
            rank: self.rank,
            tokens: &self.tokens,
            decoded_b64: B64.encode(&self.decoded),
            text: self.decoded_lossy(),
            logprob: self.logprob,
        })
        .expect("serializable")
    }

    pub fn decoded_lossy(&self) -> String {
        String::from_utf8_lossy(&self.decoded).into_owned()
    }
}

/// Concatenated token bytes; EOS contributes nothing.
pub fn decode(vocab: &Vocabulary, tokens: &[TokenId]) -> Result<Vec<u8>, VocabError> {
    vocab.decode(tokens)
}
