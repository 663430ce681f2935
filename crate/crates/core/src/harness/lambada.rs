//! Last-word prediction with increasingly constrained queries.
//!
//! * `Baseline` — greedy decoding (top-1 over the full vocabulary) until a
//!   word boundary.
//! * `Word` — any word that occurs in the context.
//! * `Terminated` — a context word followed by EOS.
//! * `NoStop` — as `Terminated`, with stop words removed from the candidates.

use std::collections::{BTreeMap, HashSet};
use std::fmt::{self, Write as _};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{csv_field, HarnessError};
use crate::regex::{escape, Dfa};
use crate::scorer::Scorer;
use crate::transducer::{transduce, TransduceOptions};
use crate::traversal::{Prompt, QuerySpec, ShortestPaths, TopKScope};
use crate::vocab::{TokenTrie, Vocabulary};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum QueryType {
    Baseline,
    Word,
    Terminated,
    NoStop,
}

impl QueryType {
    pub const ALL: [QueryType; 4] = [QueryType::Baseline, QueryType::Word, QueryType::Terminated, QueryType::NoStop];
}

impl fmt::Display for QueryType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            QueryType::Baseline => "Baseline",
            QueryType::Word => "Word",
            QueryType::Terminated => "Terminated",
            QueryType::NoStop => "No Stop",
        })
    }
}

/// One dataset row.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LambadaRow {
    pub context: String,
    pub target: String,
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Vec<LambadaRow>, HarnessError> {
    let reader = BufReader::new(File::open(path)?);
    let mut rows = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row: LambadaRow = serde_json::from_str(&line)
            .map_err(|e| HarnessError::Config(format!("dataset line {}: {e}", i + 1)))?;
        rows.push(row);
    }
    Ok(rows)
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LambadaConfig {
    pub query_types: Vec<QueryType>,
    /// Lowercase words removed for `NoStop`; matched case-insensitively.
    pub stop_words: Vec<String>,
    pub max_examples: Option<usize>,
    /// Top-k for the constrained query types (the baseline always uses 1).
    pub top_k: Option<usize>,
    pub max_match_tokens: usize,
}

impl Default for LambadaConfig {
    fn default() -> Self {
        LambadaConfig {
            query_types: QueryType::ALL.to_vec(),
            stop_words: super::default_stop_words(),
            max_examples: None,
            top_k: None,
            max_match_tokens: 16,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LambadaExample {
    pub index: usize,
    pub context: String,
    pub target_word: String,
    pub predictions: BTreeMap<QueryType, Option<String>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LambadaReport {
    pub examples: Vec<LambadaExample>,
    /// Per query type: (hits, total).
    pub hits: BTreeMap<QueryType, (usize, usize)>,
}

impl LambadaReport {
    pub fn accuracy(&self, q: QueryType) -> Option<f64> {
        self.hits.get(&q).map(|&(h, n)| if n == 0 { 0.0 } else { h as f64 / n as f64 })
    }

    /// `query_type,correct,total,accuracy`
    pub fn table_csv(&self) -> String {
        let mut out = String::from("query_type,correct,total,accuracy\n");
        for (q, &(h, n)) in &self.hits {
            let _ = writeln!(out, "{q},{h},{n},{:.6}", self.accuracy(*q).unwrap_or(0.0));
        }
        out
    }

    pub fn examples_csv(&self) -> String {
        let types: Vec<QueryType> = self.hits.keys().copied().collect();
        let mut out = String::from("index,target");
        for q in &types {
            let _ = write!(out, ",{q}");
        }
        out.push('\n');
        for e in &self.examples {
            let _ = write!(out, "{},{}", e.index, csv_field(&e.target_word));
            for q in &types {
                let p = e.predictions.get(q).cloned().flatten().unwrap_or_default();
                let _ = write!(out, ",{}", csv_field(&p));
            }
            out.push('\n');
        }
        out
    }
}

const PUNCT: &[char] = &['.', ',', ';', ':', '!', '?', '"', '\'', '(', ')', '[', ']', '-', '`'];

/// Distinct whitespace-delimited words of `context` with surrounding
/// punctuation stripped, in first-occurrence order. Case is preserved.
pub fn candidate_words(context: &str) -> Vec<String> {
    let mut seen = HashSet::new();
    context
        .split_whitespace()
        .map(|w| w.trim_matches(|c: char| PUNCT.contains(&c) || c.is_ascii_punctuation()))
        .filter(|w| !w.is_empty())
        .filter(|w| seen.insert(w.to_string()))
        .map(str::to_string)
        .collect()
}

/// Runs every configured query type on every example. A prediction is a
/// hit when it equals the target exactly.
pub fn run_language_understanding<S: Scorer>(
    scorer: S,
    vocab: &Vocabulary,
    dataset: &[LambadaRow],
    config: &LambadaConfig,
) -> Result<LambadaReport, HarnessError> {
    if config.max_match_tokens == 0 || config.top_k == Some(0) {
        return Err(HarnessError::Config("top_k and max_match_tokens must be positive".into()));
    }
    let trie = TokenTrie::build(vocab);
    let stop: HashSet<String> = config.stop_words.iter().map(|w| w.to_lowercase()).collect();
    let rows = &dataset[..config.max_examples.unwrap_or(dataset.len()).min(dataset.len())];

    let mut examples = Vec::with_capacity(rows.len());
    let mut hits: BTreeMap<QueryType, (usize, usize)> =
        config.query_types.iter().map(|&q| (q, (0, 0))).collect();
    for (index, row) in rows.iter().enumerate() {
        let prompt = vocab.encode_greedy(&trie, row.context.as_bytes())?;
        let lead = if row.context.ends_with(char::is_whitespace) || row.context.is_empty() { "" } else { " " };
        let words = candidate_words(&row.context);
        let mut predictions = BTreeMap::new();
        for &q in &config.query_types {
            let prediction = match q {
                QueryType::Baseline => {
                    let pattern = format!("{lead}{WORD}+{BOUNDARY}.*");
                    let out = first_match(&scorer, vocab, &trie, &pattern, false, &prompt, Some(1), config)?;
                    out.map(|s| leading_word(&s))
                }
                QueryType::Word | QueryType::Terminated | QueryType::NoStop => {
                    let candidates: Vec<&String> = words
                        .iter()
                        .filter(|w| q != QueryType::NoStop || !stop.contains(&w.to_lowercase()))
                        .collect();
                    if candidates.is_empty() {
                        None
                    } else {
                        let alts: Vec<String> = candidates.iter().map(|w| format!("({})", escape(w))).collect();
                        let pattern = format!("{}({})", escape(lead), alts.join("|"));
                        let terminated = q != QueryType::Word;
                        first_match(&scorer, vocab, &trie, &pattern, terminated, &prompt, config.top_k, config)?
                            .map(|s| s.trim().to_string())
                    }
                }
            };
            let entry = hits.get_mut(&q).expect("configured type");
            entry.1 += 1;
            if prediction.as_deref() == Some(row.target.as_str()) {
                entry.0 += 1;
            }
            predictions.insert(q, prediction);
        }
        examples.push(LambadaExample {
            index,
            context: row.context.clone(),
            target_word: row.target.clone(),
            predictions,
        });
    }
    Ok(LambadaReport { examples, hits })
}

/// Bytes that may appear inside a word.
const WORD: &str = r#"[^ \t\r\n.,;:!?"()]"#;
/// A byte that ends a word.
const BOUNDARY: &str = r#"[ \t\r\n.,;:!?"()]"#;

fn leading_word(s: &str) -> String {
    s.trim_start()
        .split(|c: char| c.is_whitespace() || ".,;:!?\"()".contains(c))
        .next()
        .unwrap_or_default()
        .to_string()
}

#[allow(clippy::too_many_arguments)]
fn first_match<S: Scorer>(
    scorer: &S,
    vocab: &Vocabulary,
    trie: &TokenTrie,
    pattern: &str,
    terminated: bool,
    prompt: &[u32],
    top_k: Option<usize>,
    config: &LambadaConfig,
) -> Result<Option<String>, HarnessError> {
    let dfa = Dfa::compile(pattern)?;
    let ta = transduce(&dfa, vocab, trie, &TransduceOptions::terminated(terminated))?;
    let mut spec = QuerySpec::new(&ta, vocab);
    spec.prompt = Prompt::Fixed(prompt.to_vec());
    spec.top_k = top_k;
    spec.topk_scope = TopKScope::FullVocab;
    spec.max_match_tokens = config.max_match_tokens;
    let first = ShortestPaths::new(spec, scorer)?.next().transpose()?;
    Ok(first.map(|m| m.decoded_lossy()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn candidate_extraction() {
        assert_eq!(
            candidate_words("\"Hello,\" said the dog. The dog barked!"),
            vec!["Hello", "said", "the", "dog", "The", "barked"]
        );
        assert!(candidate_words("... !!").is_empty());
    }

    #[test]
    fn leading_word_extraction() {
        assert_eq!(leading_word(" dog. The"), "dog");
        assert_eq!(leading_word(" it's\n"), "it's");
    }

    #[test]
    fn config_defaults() {
        let c: LambadaConfig = serde_json::from_str(r#"{"max_examples": 3}"#).unwrap();
        assert_eq!(c.query_types.len(), 4);
        assert!(c.stop_words.contains(&"it".to_string()));
        let c: LambadaConfig = serde_json::from_str(r#"{"query_types": ["Word", "NoStop"]}"#).unwrap();
        assert_eq!(c.query_types, vec![QueryType::Word, QueryType::NoStop]);
    }
}
