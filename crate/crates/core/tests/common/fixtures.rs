//! Small synthetic worlds for the experiment harnesses.

use std::collections::BTreeSet;

use lmquery::harness::LambadaRow;
use lmquery::scorer::{FixtureScorer, NGramModel};
use lmquery::vocab::{TokenId, TokenTrie, Vocabulary};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// ---- URLs

pub struct UrlWorld {
    pub vocab: Vocabulary,
    pub urls: Vec<String>,
    /// Greedy tokenization of each URL followed by EOS.
    pub corpus: Vec<Vec<TokenId>>,
}

const NAMES: &[&str] = &[
    "alpha", "bravo", "delta", "echo", "golf", "hotel", "india", "kilo", "lima", "mike", "nova", "oscar",
    "papa", "romeo", "sierra", "tango", "victor", "yankee", "zulu", "atlas",
];
const TLDS: &[&str] = &[".com", ".org", ".net", ".io"];
const PATHS: &[&str] = &["", "/", "/about", "/news", "/blog/post", "/wiki/main"];

/// 50 distinct URLs over a character-level vocabulary with a few
/// multi-byte chunks.
pub fn url_world() -> UrlWorld {
    let mut rng = ChaCha8Rng::seed_from_u64(50);
    let mut urls = BTreeSet::new();
    while urls.len() < 50 {
        let www = if rng.gen_bool(0.5) { "www." } else { "" };
        let name = NAMES.choose(&mut rng).unwrap();
        let digit = if rng.gen_bool(0.3) { rng.gen_range(0..10).to_string() } else { String::new() };
        let tld = TLDS.choose(&mut rng).unwrap();
        let path = PATHS.choose(&mut rng).unwrap();
        urls.insert(format!("https://{www}{name}{digit}{tld}{path}"));
    }
    let mut tokens: Vec<String> = ["https://", "www.", "/", ".", "-", "al", "er", "an", "or", "in", "ol"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    tokens.extend(TLDS.iter().map(|s| s.to_string()));
    tokens.extend(('a'..='z').map(String::from));
    tokens.extend(('0'..='9').map(String::from));
    let vocab = Vocabulary::from_strs(&tokens);
    let trie = TokenTrie::build(&vocab);
    let urls: Vec<String> = urls.into_iter().collect();
    let corpus = urls
        .iter()
        .map(|u| {
            let mut seq = vocab.encode_greedy(&trie, u.as_bytes()).unwrap();
            seq.push(vocab.eos_id());
            seq
        })
        .collect();
    UrlWorld { vocab, urls, corpus }
}

impl UrlWorld {
    pub fn ngram(&self, order: usize, alpha: f64) -> NGramModel {
        NGramModel::train(&self.corpus, order, alpha, self.vocab.size()).unwrap()
    }
}

// ---- last-word prediction

pub const ANIMALS: &[&str] = &["dog", "cat", "bird", "fish", "horse", "cow", "fox", "owl"];

pub struct LambadaWorld {
    pub vocab: Vocabulary,
    pub rows: Vec<LambadaRow>,
    pub scorer: FixtureScorer,
}

fn lambada_vocab() -> Vocabulary {
    let mut tokens: Vec<String> =
        ["Once", ".", " the", " a", " it", " saw", " near", " and", " zebra"].iter().map(|s| s.to_string()).collect();
    tokens.extend(ANIMALS.iter().map(|a| format!(" {a}")));
    Vocabulary::from_strs(&tokens)
}

fn id_of(vocab: &Vocabulary, tok: &str) -> TokenId {
    vocab.iter().find(|(_, b)| *b == tok.as_bytes()).unwrap().0
}

/// Probabilities with fixed mass on `picks` and the rest spread evenly.
fn rigged(vocab: &Vocabulary, picks: &[(&str, f64)]) -> Vec<f64> {
    let n = vocab.size();
    let fixed: f64 = picks.iter().map(|p| p.1).sum();
    let mut probs = vec![(1.0 - fixed) / (n - picks.len()) as f64; n];
    for (tok, p) in picks {
        probs[id_of(vocab, tok) as usize] = *p;
    }
    probs
}

fn base_fixture(vocab: &Vocabulary) -> FixtureScorer {
    // after any word, "." is the favourite continuation
    FixtureScorer::from_probs(&rigged(vocab, &[(".", 0.3)])).unwrap()
}

/// 20 passages whose target is the most likely context word. In even
/// passages a word absent from the context ("zebra") is the overall
/// favourite, which only the unconstrained baseline falls for.
pub fn lambada_world() -> LambadaWorld {
    let vocab = lambada_vocab();
    let trie = TokenTrie::build(&vocab);
    let mut scorer = base_fixture(&vocab);
    let mut rows = Vec::new();
    for i in 0..20 {
        let target = ANIMALS[i % ANIMALS.len()];
        let a = ANIMALS[(i + 1) % ANIMALS.len()];
        let b = ANIMALS[(i + 3) % ANIMALS.len()];
        let context = format!("Once the {target} saw a {a} near the {b} and the {target} saw it.");
        let prompt = vocab.encode_greedy(&trie, context.as_bytes()).unwrap();
        let t = format!(" {target}");
        let probs = if i % 2 == 0 {
            rigged(&vocab, &[(" zebra", 0.30), (&t, 0.25)])
        } else {
            rigged(&vocab, &[(&t, 0.40), (" zebra", 0.05)])
        };
        scorer.insert_probs(prompt, &probs).unwrap();
        rows.push(LambadaRow { context, target: target.to_string() });
    }
    LambadaWorld { vocab, rows, scorer }
}

/// One passage whose most likely context word is the stop word "it".
pub fn stop_word_world() -> LambadaWorld {
    let vocab = lambada_vocab();
    let trie = TokenTrie::build(&vocab);
    let mut scorer = base_fixture(&vocab);
    let context = "Once the dog saw it and it saw the cat.".to_string();
    let prompt = vocab.encode_greedy(&trie, context.as_bytes()).unwrap();
    scorer.insert_probs(prompt, &rigged(&vocab, &[(" it", 0.4), (" dog", 0.3)])).unwrap();
    LambadaWorld { vocab, rows: vec![LambadaRow { context, target: "dog".into() }], scorer }
}

// ---- bias

pub const PROFESSIONS: &[&str] = &["art", "law", "science"];

pub struct BiasWorld {
    pub vocab: Vocabulary,
    pub scorer: FixtureScorer,
}

pub fn bias_vocab() -> Vocabulary {
    Vocabulary::from_strs(&["The", " man", " woman", " was trained in ", "art", "law", "science", "sci", "ence", " "])
}

/// `profession_probs[g]` gives p(art, law, science, sci) after gender `g`'s
/// prompt; `sci_ence[g]` is p("ence" | ... "sci"). Gender tokens get 0.7 / 0.2.
pub fn bias_world(profession_probs: [[f64; 4]; 2], sci_ence: [f64; 2]) -> BiasWorld {
    let vocab = bias_vocab();
    let n = vocab.size();
    let spread = |picks: &[(TokenId, f64)]| {
        let fixed: f64 = picks.iter().map(|p| p.1).sum();
        let mut probs = vec![(1.0 - fixed) / (n - picks.len()) as f64; n];
        for &(t, p) in picks {
            probs[t as usize] = p;
        }
        probs
    };
    let mut scorer = FixtureScorer::from_probs(&vec![1.0 / n as f64; n]).unwrap();
    scorer.insert_probs(vec![], &spread(&[(0, 0.9)])).unwrap();
    scorer.insert_probs(vec![0], &spread(&[(1, 0.7), (2, 0.2)])).unwrap();
    for g in 0..2u32 {
        let gender = g + 1;
        scorer.insert_probs(vec![0, gender], &spread(&[(3, 0.8)])).unwrap();
        let p = profession_probs[g as usize];
        scorer
            .insert_probs(vec![0, gender, 3], &spread(&[(4, p[0]), (5, p[1]), (6, p[2]), (7, p[3])]))
            .unwrap();
        scorer.insert_probs(vec![0, gender, 3, 7], &spread(&[(8, sci_ence[g as usize])])).unwrap();
    }
    BiasWorld { vocab, scorer }
}

/// Every sentence the bias pattern accepts.
pub fn bias_sentences() -> Vec<(usize, usize, String)> {
    let mut out = Vec::new();
    for (g, gender) in ["man", "woman"].iter().enumerate() {
        for (p, prof) in PROFESSIONS.iter().enumerate() {
            out.push((g, p, format!("The {gender} was trained in {prof}")));
        }
    }
    out
}
