use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{check_normalized, Scorer, ScorerError};
use crate::vocab::TokenId;

const TOLERANCE: f64 = 1e-6;

/// A next-token distribution as written in a fixture file. Exactly one of
/// the three forms must be given; `sparse_probs` leaves unlisted ids at 0.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Distribution {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub logprobs: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probs: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sparse_probs: Option<Vec<(TokenId, f64)>>,
}

impl Distribution {
    fn to_logprobs(&self, vocab_size: usize) -> Result<Vec<f64>, ScorerError> {
        let given = [self.logprobs.is_some(), self.probs.is_some(), self.sparse_probs.is_some()];
        if given.iter().filter(|&&g| g).count() != 1 {
            return Err(ScorerError::Invalid(
                "a distribution needs exactly one of logprobs, probs, sparse_probs".into(),
            ));
        }
        if let Some(lp) = &self.logprobs {
            return Ok(lp.clone());
        }
        if let Some(p) = &self.probs {
            return Ok(p.iter().map(|x| x.ln()).collect());
        }
        let mut probs = vec![0.0; vocab_size];
        for &(id, p) in self.sparse_probs.as_deref().unwrap_or_default() {
            let slot = probs
                .get_mut(id as usize)
                .ok_or(ScorerError::InvalidToken { id, vocab_size })?;
            *slot += p;
        }
        Ok(probs.into_iter().map(f64::ln).collect())
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FixtureEntry {
    pub prefix: Vec<TokenId>,
    #[serde(flatten)]
    pub dist: Distribution,
}

/// On-disk fixture table.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixtureFile {
    pub vocab_size: usize,
    pub default: Distribution,
    #[serde(default)]
    pub entries: Vec<FixtureEntry>,
}

/// Explicit prefix → distribution table with a default for unlisted prefixes.
#[derive(Clone, Debug)]
pub struct FixtureScorer {
    vocab_size: usize,
    default: Vec<f64>,
    table: HashMap<Vec<TokenId>, Vec<f64>>,
}

impl FixtureScorer {
    pub fn new(default_logprobs: Vec<f64>) -> Result<Self, ScorerError> {
        check_normalized(&default_logprobs, TOLERANCE)?;
        Ok(FixtureScorer { vocab_size: default_logprobs.len(), default: default_logprobs, table: HashMap::new() })
    }

    pub fn from_probs(default_probs: &[f64]) -> Result<Self, ScorerError> {
        Self::new(default_probs.iter().map(|p| p.ln()).collect())
    }

    pub fn insert(&mut self, prefix: Vec<TokenId>, logprobs: Vec<f64>) -> Result<(), ScorerError> {
        if logprobs.len() != self.vocab_size {
            return Err(ScorerError::ShapeMismatch { expected: self.vocab_size, found: logprobs.len() });
        }
        check_normalized(&logprobs, TOLERANCE)?;
        self.table.insert(prefix, logprobs);
        Ok(())
    }

    pub fn insert_probs(&mut self, prefix: Vec<TokenId>, probs: &[f64]) -> Result<(), ScorerError> {
        self.insert(prefix, probs.iter().map(|p| p.ln()).collect())
    }

    /// `pairs` get their listed mass, every other id gets zero.
    pub fn insert_sparse(&mut self, prefix: Vec<TokenId>, pairs: &[(TokenId, f64)]) -> Result<(), ScorerError> {
        let lp = Distribution { sparse_probs: Some(pairs.to_vec()), ..Default::default() }
            .to_logprobs(self.vocab_size)?;
        self.insert(prefix, lp)
    }

    pub fn from_file_data(file: &FixtureFile) -> Result<Self, ScorerError> {
        let default = file.default.to_logprobs(file.vocab_size)?;
        if default.len() != file.vocab_size {
            return Err(ScorerError::ShapeMismatch { expected: file.vocab_size, found: default.len() });
        }
        let mut s = Self::new(default)?;
        for e in &file.entries {
            s.insert(e.prefix.clone(), e.dist.to_logprobs(file.vocab_size)?)?;
        }
        Ok(s)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ScorerError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|e| ScorerError::Invalid(format!("cannot read fixture {}: {e}", path.display())))?;
        let file: FixtureFile =
            serde_json::from_str(&text).map_err(|e| ScorerError::Invalid(format!("fixture: {e}")))?;
        Self::from_file_data(&file)
    }

    /// Serializable form, entries ordered by prefix. Written as plain
    /// probabilities so zero-probability tokens survive JSON.
    pub fn to_file_data(&self) -> FixtureFile {
        let mut entries: Vec<FixtureEntry> = self
            .table
            .iter()
            .map(|(p, lp)| FixtureEntry {
                prefix: p.clone(),
                dist: as_probs(lp),
            })
            .collect();
        entries.sort_by(|a, b| a.prefix.cmp(&b.prefix));
        FixtureFile {
            vocab_size: self.vocab_size,
            default: as_probs(&self.default),
            entries,
        }
    }
}

fn as_probs(lp: &[f64]) -> Distribution {
    Distribution { probs: Some(lp.iter().map(|x| x.exp()).collect()), ..Default::default() }
}

impl Scorer for FixtureScorer {
    fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    fn next_logprobs(&self, prefix: &[TokenId]) -> Result<Vec<f64>, ScorerError> {
        Ok(self.table.get(prefix).unwrap_or(&self.default).clone())
    }
}
