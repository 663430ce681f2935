//! JSON config files for the `eval-*` subcommands. Paths inside a config
//! are relative to the config file's directory.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{Context, Result};
use lmquery::harness::validate::{MockStatus, DEFAULT_USER_AGENT};
use lmquery::harness::{BiasConfig, LambadaConfig, LiveValidator, MemorizationConfig, MockValidator, UrlValidator};
use serde::de::DeserializeOwned;
use serde::Deserialize;

use crate::spec::ScorerSpec;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MemConfig {
    pub vocab: PathBuf,
    pub scorer: String,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub experiment: MemorizationConfig,
    pub validation: ValidationConfig,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LambadaFileConfig {
    pub vocab: PathBuf,
    pub scorer: String,
    pub output_dir: PathBuf,
    pub dataset: PathBuf,
    #[serde(default)]
    pub experiment: LambadaConfig,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BiasFileConfig {
    pub vocab: PathBuf,
    pub scorer: String,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub experiment: BiasConfig,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidationConfig {
    #[serde(default = "default_concurrency")]
    pub max_concurrency: usize,
    pub validator: ValidatorConfig,
}

fn default_concurrency() -> usize {
    16
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ValidatorConfig {
    Mock {
        #[serde(default)]
        statuses: HashMap<String, MockStatus>,
        #[serde(default = "default_mock_status")]
        default: MockStatus,
    },
    Live {
        #[serde(default = "default_timeout")]
        timeout_s: f64,
        #[serde(default = "default_user_agent")]
        user_agent: String,
    },
}

fn default_mock_status() -> MockStatus {
    MockStatus::Code(404)
}

fn default_timeout() -> f64 {
    10.0
}

fn default_user_agent() -> String {
    DEFAULT_USER_AGENT.to_string()
}

impl ValidationConfig {
    pub fn check(&self) -> Result<()> {
        anyhow::ensure!(self.max_concurrency >= 1, "max_concurrency must be at least 1");
        if let ValidatorConfig::Live { timeout_s, .. } = &self.validator {
            anyhow::ensure!(*timeout_s > 0.0 && timeout_s.is_finite(), "timeout_s must be positive");
        }
        Ok(())
    }

    pub fn build(&self) -> Box<dyn UrlValidator> {
        match &self.validator {
            ValidatorConfig::Mock { statuses, default } => Box::new(MockValidator::from_config(statuses, *default)),
            ValidatorConfig::Live { timeout_s, user_agent } => {
                Box::new(LiveValidator::new(Duration::from_secs_f64(*timeout_s), user_agent))
            }
        }
    }
}

/// A parsed config file plus what is needed to resolve and fingerprint it.
pub struct Loaded<T> {
    pub config: T,
    pub dir: PathBuf,
    pub bytes: Vec<u8>,
}

impl<T> Loaded<T> {
    pub fn resolve(&self, p: &Path) -> PathBuf {
        self.dir.join(p)
    }

    pub fn scorer_spec(&self, s: &str) -> Result<ScorerSpec> {
        ScorerSpec::parse(s, &self.dir)
    }
}

pub fn load<T: DeserializeOwned>(path: &Path) -> Result<Loaded<T>> {
    let bytes = fs::read(path).with_context(|| format!("reading config {}", path.display()))?;
    let config = serde_json::from_slice(&bytes).with_context(|| format!("parsing config {}", path.display()))?;
    let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok(Loaded { config, dir, bytes })
}
