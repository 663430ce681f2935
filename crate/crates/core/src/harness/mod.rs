//! Experiment runners: URL memorization with validation and throughput
//! curves, last-word prediction under four query types, and
//! gender × profession bias estimation.

pub mod bias;
pub mod lambada;
pub mod memorization;
pub mod report;
pub mod validate;

use std::fs;
use std::io;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::regex::CompileError;
use crate::transducer::TransduceError;
use crate::traversal::TraversalError;
use crate::vocab::VocabError;

pub use bias::{run_bias, BiasConfig, BiasEstimate};
pub use lambada::{
    candidate_words, load_dataset, run_language_understanding, LambadaConfig, LambadaExample,
    LambadaReport, LambadaRow, QueryType,
};
pub use memorization::{run_memorization, Arm, ClockMode, MemorizationConfig, UrlRecord, DEFAULT_URL_REGEX};
pub use report::{throughput_report, ArmSummary, CurveRow, ThroughputReport};
pub use validate::{validate_urls, LiveValidator, MockValidator, UrlStatus, UrlValidator};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Compile(#[from] CompileError),
    #[error(transparent)]
    Transduce(#[from] TransduceError),
    #[error(transparent)]
    Traversal(#[from] TraversalError),
    #[error(transparent)]
    Vocab(#[from] VocabError),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("invalid configuration: {0}")]
    Config(String),
}

impl From<crate::scorer::ScorerError> for HarnessError {
    fn from(e: crate::scorer::ScorerError) -> Self {
        HarnessError::Traversal(e.into())
    }
}

/// The shipped stop-word list, lowercase.
pub fn default_stop_words() -> Vec<String> {
    include_str!("../../data/stopwords.txt")
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_string)
        .collect()
}

/// Run metadata written next to every report.
#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub seed: u64,
    pub config_sha256: String,
    /// Wall-clock duration of the whole run.
    pub wall_time_s: f64,
    pub outputs: Vec<String>,
    pub summary: serde_json::Value,
}

impl RunManifest {
    pub fn write(&self, path: impl AsRef<Path>) -> io::Result<()> {
        fs::write(path, serde_json::to_string_pretty(self)? + "\n")
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Minimal CSV field quoting.
pub(crate) fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stop_words_loaded() {
        let words = default_stop_words();
        assert!(words.len() >= 50);
        assert!(words.contains(&"it".to_string()));
        assert!(words.iter().all(|w| w == &w.to_lowercase()));
    }

    #[test]
    fn csv_quoting() {
        assert_eq!(csv_field("plain"), "plain");
        assert_eq!(csv_field("a,b"), "\"a,b\"");
        assert_eq!(csv_field("say \"hi\""), "\"say \"\"hi\"\"\"");
    }
}
