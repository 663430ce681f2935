use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use super::{Scorer, ScorerError};
use crate::vocab::TokenId;

/// Context padding before the first real token. Never a valid token id.
pub const BEGIN_MARKER: TokenId = TokenId::MAX;

#[derive(Clone, Debug, Default)]
struct ContextCounts {
    total: u64,
    next: HashMap<TokenId, u64>,
}

/// Additively smoothed n-gram model:
/// `p(t | ctx) = (count(ctx, t) + alpha) / (total(ctx) + alpha * |V|)`,
/// with contexts shorter than `order - 1` left-padded by [`BEGIN_MARKER`].
#[derive(Clone, Debug)]
pub struct NGramModel {
    order: usize,
    alpha: f64,
    vocab_size: usize,
    counts: HashMap<Vec<TokenId>, ContextCounts>,
}

impl NGramModel {
    pub fn train(
        corpus: &[Vec<TokenId>],
        order: usize,
        alpha: f64,
        vocab_size: usize,
    ) -> Result<Self, ScorerError> {
        if order < 1 {
            return Err(ScorerError::Invalid("n-gram order must be at least 1".into()));
        }
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(ScorerError::Invalid(format!("smoothing constant must be positive, got {alpha}")));
        }
        if vocab_size == 0 {
            return Err(ScorerError::Invalid("vocabulary must be non-empty".into()));
        }
        let mut counts: HashMap<Vec<TokenId>, ContextCounts> = HashMap::new();
        for seq in corpus {
            let mut padded = vec![BEGIN_MARKER; order - 1];
            for &t in seq {
                if t as usize >= vocab_size {
                    return Err(ScorerError::InvalidToken { id: t, vocab_size });
                }
                let ctx = padded[padded.len() - (order - 1)..].to_vec();
                let entry = counts.entry(ctx).or_default();
                entry.total += 1;
                *entry.next.entry(t).or_default() += 1;
                padded.push(t);
            }
        }
        Ok(NGramModel { order, alpha, vocab_size, counts })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// The `order - 1` most recent tokens of `prefix`, padded on the left.
    pub fn context_of(&self, prefix: &[TokenId]) -> Vec<TokenId> {
        let want = self.order - 1;
        let mut ctx = vec![BEGIN_MARKER; want.saturating_sub(prefix.len())];
        ctx.extend_from_slice(&prefix[prefix.len().saturating_sub(want)..]);
        ctx
    }

    pub fn count(&self, ctx: &[TokenId], t: TokenId) -> u64 {
        self.counts.get(ctx).and_then(|c| c.next.get(&t)).copied().unwrap_or(0)
    }

    pub fn total(&self, ctx: &[TokenId]) -> u64 {
        self.counts.get(ctx).map_or(0, |c| c.total)
    }

    /// Smoothed probability of `t` after the exact context `ctx`.
    pub fn probability(&self, ctx: &[TokenId], t: TokenId) -> f64 {
        (self.count(ctx, t) as f64 + self.alpha)
            / (self.total(ctx) as f64 + self.alpha * self.vocab_size as f64)
    }
}

impl Scorer for NGramModel {
    fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    fn next_logprobs(&self, prefix: &[TokenId]) -> Result<Vec<f64>, ScorerError> {
        if let Some(&bad) = prefix.iter().find(|&&t| t as usize >= self.vocab_size) {
            return Err(ScorerError::InvalidToken { id: bad, vocab_size: self.vocab_size });
        }
        let ctx = self.context_of(prefix);
        let denom = match self.counts.get(&ctx) {
            Some(c) => c.total as f64 + self.alpha * self.vocab_size as f64,
            None => self.alpha * self.vocab_size as f64,
        };
        let base = (self.alpha / denom).ln();
        let mut out = vec![base; self.vocab_size];
        if let Some(c) = self.counts.get(&ctx) {
            for (&t, &n) in &c.next {
                out[t as usize] = ((n as f64 + self.alpha) / denom).ln();
            }
        }
        Ok(out)
    }
}

/// Reads a corpus file: one JSON array of token ids per line.
pub fn load_corpus(path: impl AsRef<Path>) -> Result<Vec<Vec<TokenId>>, ScorerError> {
    let path = path.as_ref();
    let file = File::open(path)
        .map_err(|e| ScorerError::Invalid(format!("cannot open corpus {}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| ScorerError::Invalid(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let seq: Vec<TokenId> = serde_json::from_str(&line)
            .map_err(|e| ScorerError::Invalid(format!("corpus line {}: {e}", i + 1)))?;
        out.push(seq);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scorer::logsumexp;
    use proptest::prelude::*;

    #[test]
    fn bigram_hand_count() {
        let m = NGramModel::train(&[vec![0, 1], vec![0, 1]], 2, 1.0, 2).unwrap();
        let lp = m.next_logprobs(&[0]).unwrap();
        assert!((lp[1].exp() - 0.75).abs() < 1e-12);
        assert!((m.probability(&[0], 1) - 0.75).abs() < 1e-12);
    }

    #[test]
    fn empty_corpus_is_uniform() {
        let m = NGramModel::train(&[], 3, 0.5, 5).unwrap();
        for prefix in [&[][..], &[1, 2, 3][..]] {
            for x in m.next_logprobs(prefix).unwrap() {
                assert!((x.exp() - 0.2).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn heavy_smoothing_flattens() {
        let m = NGramModel::train(&[vec![0, 1], vec![0, 1]], 2, 1e6, 2).unwrap();
        assert!((m.probability(&[0], 1) - 0.5).abs() < 1e-3);
    }

    #[test]
    fn start_context_is_padded() {
        let m = NGramModel::train(&[vec![2, 0]], 3, 1.0, 3).unwrap();
        assert_eq!(m.context_of(&[]), vec![BEGIN_MARKER, BEGIN_MARKER]);
        assert_eq!(m.context_of(&[7]), vec![BEGIN_MARKER, 7]);
        assert_eq!(m.count(&[BEGIN_MARKER, BEGIN_MARKER], 2), 1);
        assert_eq!(m.count(&[BEGIN_MARKER, 2], 0), 1);
    }

    #[test]
    fn bad_inputs() {
        assert!(NGramModel::train(&[vec![5]], 2, 1.0, 3).is_err());
        assert!(NGramModel::train(&[], 0, 1.0, 3).is_err());
        assert!(NGramModel::train(&[], 2, 0.0, 3).is_err());
        let m = NGramModel::train(&[], 2, 1.0, 3).unwrap();
        assert!(m.next_logprobs(&[3]).is_err());
    }

    proptest! {
        #[test]
        fn matches_closed_form(
            vocab in 1usize..8,
            raw in prop::collection::vec(prop::collection::vec(0u32..8, 0..6), 0..50),
            order in 1usize..4,
            alpha in 0.01f64..3.0,
            prefix in prop::collection::vec(0u32..8, 0..4),
        ) {
            let corpus: Vec<Vec<u32>> = raw
                .into_iter()
                .map(|s| s.into_iter().map(|t| t % vocab as u32).collect())
                .collect();
            let prefix: Vec<u32> = prefix.into_iter().map(|t| t % vocab as u32).collect();
            let m = NGramModel::train(&corpus, order, alpha, vocab).unwrap();
            let lp = m.next_logprobs(&prefix).unwrap();
            prop_assert!(logsumexp(&lp).abs() < 1e-9);

            // direct recount over the padded corpus
            let ctx = m.context_of(&prefix);
            let mut count = vec![0u64; vocab];
            let mut total = 0u64;
            for seq in &corpus {
                let mut padded = vec![BEGIN_MARKER; order - 1];
                padded.extend_from_slice(seq);
                for i in (order - 1)..padded.len() {
                    if padded[i - (order - 1)..i] == ctx[..] {
                        count[padded[i] as usize] += 1;
                        total += 1;
                    }
                }
            }
            for t in 0..vocab {
                let expected = (count[t] as f64 + alpha) / (total as f64 + alpha * vocab as f64);
                prop_assert!((lp[t].exp() - expected).abs() < 1e-12);
            }
        }
    }
}
