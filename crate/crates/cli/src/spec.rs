//! Scorer spec strings: `uniform`, `ngram:<corpus>:<order>:<alpha>`,
//! `fixture:<table>`, `remote:<url>`.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use lmquery::scorer::{load_corpus, FixtureScorer, NGramModel, RemoteScorer, Scorer, UniformScorer};

#[derive(Clone, Debug, PartialEq)]
pub enum ScorerSpec {
    Uniform,
    NGram { corpus: PathBuf, order: usize, alpha: f64 },
    Fixture(PathBuf),
    Remote(String),
}

impl ScorerSpec {
    /// Relative paths are resolved against `base`.
    pub fn parse(s: &str, base: &Path) -> Result<Self> {
        let (kind, rest) = s.split_once(':').unwrap_or((s, ""));
        match kind {
            "uniform" if rest.is_empty() => Ok(ScorerSpec::Uniform),
            "ngram" => {
                // the corpus path may itself contain ':'
                let mut parts = rest.rsplitn(3, ':');
                let (alpha, order, corpus) = match (parts.next(), parts.next(), parts.next()) {
                    (Some(a), Some(o), Some(c)) if !c.is_empty() => (a, o, c),
                    _ => bail!("expected ngram:<corpus path>:<order>:<alpha>, got {s:?}"),
                };
                let order: usize = order.parse().with_context(|| format!("bad n-gram order {order:?}"))?;
                let alpha: f64 = alpha.parse().with_context(|| format!("bad smoothing constant {alpha:?}"))?;
                if order == 0 || !(alpha > 0.0 && alpha.is_finite()) {
                    bail!("n-gram order and smoothing constant must be positive");
                }
                Ok(ScorerSpec::NGram { corpus: base.join(corpus), order, alpha })
            }
            "fixture" if !rest.is_empty() => Ok(ScorerSpec::Fixture(base.join(rest))),
            "remote" if rest.starts_with("http://") || rest.starts_with("https://") => {
                Ok(ScorerSpec::Remote(rest.to_string()))
            }
            _ => bail!("unrecognized scorer spec {s:?}; expected uniform, ngram:<corpus>:<order>:<alpha>, fixture:<path> or remote:<url>"),
        }
    }

    /// Loads local scorers. A remote scorer is only configured here; it
    /// makes no request until first used.
    pub fn build(&self, vocab_size: usize) -> Result<Box<dyn Scorer>> {
        Ok(match self {
            ScorerSpec::Uniform => Box::new(UniformScorer::new(vocab_size)),
            ScorerSpec::NGram { corpus, order, alpha } => {
                let corpus = load_corpus(corpus).with_context(|| format!("loading corpus {}", corpus.display()))?;
                Box::new(NGramModel::train(&corpus, *order, *alpha, vocab_size)?)
            }
            ScorerSpec::Fixture(path) => {
                let f = FixtureScorer::load(path).with_context(|| format!("loading fixture {}", path.display()))?;
                if f.vocab_size() != vocab_size {
                    bail!("fixture covers {} tokens but the vocabulary has {vocab_size}", f.vocab_size());
                }
                Box::new(f)
            }
            ScorerSpec::Remote(url) => Box::new(RemoteScorer::with_vocab_size(url, vocab_size)),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parsing() {
        let base = Path::new("/cfg");
        assert_eq!(ScorerSpec::parse("uniform", base).unwrap(), ScorerSpec::Uniform);
        assert_eq!(
            ScorerSpec::parse("ngram:data/c.jsonl:3:0.5", base).unwrap(),
            ScorerSpec::NGram { corpus: "/cfg/data/c.jsonl".into(), order: 3, alpha: 0.5 }
        );
        assert_eq!(
            ScorerSpec::parse("ngram:C:/x.jsonl:2:1", base).unwrap(),
            ScorerSpec::NGram { corpus: "/cfg/C:/x.jsonl".into(), order: 2, alpha: 1.0 }
        );
        assert_eq!(ScorerSpec::parse("fixture:/abs/t.json", base).unwrap(), ScorerSpec::Fixture("/abs/t.json".into()));
        assert_eq!(
            ScorerSpec::parse("remote:http://127.0.0.1:8000", base).unwrap(),
            ScorerSpec::Remote("http://127.0.0.1:8000".into())
        );
        for bad in ["", "uniform:x", "ngram:c:0:1", "ngram:c:2:-1", "ngram:2:1", "fixture:", "remote:ftp://x", "gpt2"] {
            assert!(ScorerSpec::parse(bad, base).is_err(), "{bad}");
        }
    }
}
