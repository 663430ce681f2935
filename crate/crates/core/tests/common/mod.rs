//! Brute-force oracles shared by the integration tests. Nothing here uses
//! the library's automata: matching is done on the syntax tree directly and
//! token languages are found by exhaustive enumeration.

#![allow(dead_code)]

pub mod fixtures;

use std::collections::{BTreeMap, BTreeSet};

use lmquery::regex::{ByteClass, ByteRange, RegexAst};
use lmquery::scorer::Scorer;
use lmquery::vocab::{TokenId, Vocabulary};
use rand::seq::SliceRandom;
use rand::Rng;

pub const ALPHABET: &[u8] = b"abc";

// ---- regexes

/// A random syntax tree over `ALPHABET` with nesting depth at most `depth`.
pub fn random_ast(rng: &mut impl Rng, depth: u32) -> RegexAst {
    if depth == 0 || rng.gen_bool(0.3) {
        return match rng.gen_range(0..10) {
            0 => RegexAst::Empty,
            1..=6 => RegexAst::Literal(*ALPHABET.choose(rng).unwrap()),
            _ => {
                let mut members: Vec<u8> = ALPHABET.iter().copied().filter(|_| rng.gen_bool(0.5)).collect();
                if members.is_empty() {
                    members.push(ALPHABET[0]);
                }
                RegexAst::Class(ByteClass::new(members.into_iter().map(|b| ByteRange::new(b, b)).collect()).unwrap())
            }
        };
    }
    let child = |rng: &mut _| Box::new(random_ast(rng, depth - 1));
    match rng.gen_range(0..7) {
        0 | 1 => RegexAst::Concat((0..rng.gen_range(2..=3)).map(|_| random_ast(rng, depth - 1)).collect()),
        2 | 3 => RegexAst::Alternation((0..rng.gen_range(2..=3)).map(|_| random_ast(rng, depth - 1)).collect()),
        4 => RegexAst::Star(child(rng)),
        5 => {
            if rng.gen_bool(0.5) {
                RegexAst::Plus(child(rng))
            } else {
                RegexAst::Optional(child(rng))
            }
        }
        _ => {
            let min = rng.gen_range(0..=2);
            let max = if rng.gen_bool(0.25) { None } else { Some(min + rng.gen_range(0..=2)) };
            RegexAst::Repeat { child: child(rng), min, max }
        }
    }
}

/// Pattern text for a tree built by [`random_ast`].
pub fn render(ast: &RegexAst) -> String {
    match ast {
        RegexAst::Empty => "()".into(),
        RegexAst::Literal(b) => (*b as char).to_string(),
        RegexAst::Class(c) => {
            let mut s = String::from("[");
            for r in c.ranges() {
                s.push(r.lo as char);
                if r.hi != r.lo {
                    s.push('-');
                    s.push(r.hi as char);
                }
            }
            s.push(']');
            s
        }
        RegexAst::Concat(items) => items.iter().map(|a| format!("({})", render(a))).collect(),
        RegexAst::Alternation(items) => {
            format!("({})", items.iter().map(|a| format!("({})", render(a))).collect::<Vec<_>>().join("|"))
        }
        RegexAst::Star(a) => format!("({})*", render(a)),
        RegexAst::Plus(a) => format!("({})+", render(a)),
        RegexAst::Optional(a) => format!("({})?", render(a)),
        RegexAst::Repeat { child, min, max: Some(max) } => format!("({}){{{min},{max}}}", render(child)),
        RegexAst::Repeat { child, min, max: None } => format!("({}){{{min},}}", render(child)),
    }
}

/// End offsets reachable by matching `ast` against `s` from `start`.
fn ends(ast: &RegexAst, s: &[u8], start: usize) -> BTreeSet<usize> {
    match ast {
        RegexAst::Empty => BTreeSet::from([start]),
        RegexAst::Literal(b) => {
            if s.get(start) == Some(b) {
                BTreeSet::from([start + 1])
            } else {
                BTreeSet::new()
            }
        }
        RegexAst::Class(c) => match s.get(start) {
            Some(&b) if c.contains(b) => BTreeSet::from([start + 1]),
            _ => BTreeSet::new(),
        },
        RegexAst::Concat(items) => {
            let mut cur = BTreeSet::from([start]);
            for it in items {
                cur = cur.iter().flat_map(|&p| ends(it, s, p)).collect();
            }
            cur
        }
        RegexAst::Alternation(items) => items.iter().flat_map(|it| ends(it, s, start)).collect(),
        RegexAst::Star(a) => star_closure(a, s, BTreeSet::from([start])),
        RegexAst::Plus(a) => {
            let once = ends(a, s, start);
            star_closure(a, s, once)
        }
        RegexAst::Optional(a) => {
            let mut out = ends(a, s, start);
            out.insert(start);
            out
        }
        RegexAst::Repeat { child, min, max } => {
            let mut cur = BTreeSet::from([start]);
            for _ in 0..*min {
                cur = cur.iter().flat_map(|&p| ends(child, s, p)).collect();
            }
            match max {
                None => star_closure(child, s, cur),
                Some(max) => {
                    let mut all = cur.clone();
                    for _ in *min..*max {
                        cur = cur.iter().flat_map(|&p| ends(child, s, p)).collect();
                        all.extend(cur.iter().copied());
                    }
                    all
                }
            }
        }
    }
}

fn star_closure(a: &RegexAst, s: &[u8], from: BTreeSet<usize>) -> BTreeSet<usize> {
    let mut all = from.clone();
    let mut frontier: Vec<usize> = from.into_iter().collect();
    while let Some(p) = frontier.pop() {
        for q in ends(a, s, p) {
            if all.insert(q) {
                frontier.push(q);
            }
        }
    }
    all
}

/// Anchored full match, by direct recursion over the tree.
pub fn ast_matches(ast: &RegexAst, s: &[u8]) -> bool {
    ends(ast, s, 0).contains(&s.len())
}

/// Every string over `alphabet` of length ≤ `max_len`.
pub fn all_strings(alphabet: &[u8], max_len: usize) -> Vec<Vec<u8>> {
    let mut out = vec![Vec::new()];
    let mut layer = vec![Vec::new()];
    for _ in 0..max_len {
        layer = layer
            .iter()
            .flat_map(|p: &Vec<u8>| {
                alphabet.iter().map(move |&b| {
                    let mut q = p.clone();
                    q.push(b);
                    q
                })
            })
            .collect();
        out.extend(layer.iter().cloned());
    }
    out
}

// ---- vocabularies and token languages

/// Up to `max_tokens` distinct tokens over `ALPHABET`, each 1..=3 bytes,
/// plus a trailing EOS.
pub fn random_vocab(rng: &mut impl Rng, max_tokens: usize) -> Vocabulary {
    let n = rng.gen_range(1..=max_tokens);
    let mut toks: BTreeSet<Vec<u8>> = BTreeSet::new();
    while toks.len() < n {
        let len = rng.gen_range(1..=3);
        toks.insert((0..len).map(|_| *ALPHABET.choose(rng).unwrap()).collect());
    }
    let mut toks: Vec<Vec<u8>> = toks.into_iter().collect();
    toks.shuffle(rng);
    Vocabulary::from_strs(&toks)
}

/// Every sequence of non-EOS tokens of length ≤ `max_len` whose decoding
/// satisfies `accept`; with `terminated`, each is followed by EOS.
pub fn brute_accepted(
    vocab: &Vocabulary,
    max_len: usize,
    terminated: bool,
    accept: impl Fn(&[u8]) -> bool,
) -> BTreeSet<Vec<TokenId>> {
    let ids: Vec<TokenId> = (0..vocab.size() as TokenId).filter(|&t| t != vocab.eos_id()).collect();
    let mut out = BTreeSet::new();
    let mut layer: Vec<(Vec<TokenId>, Vec<u8>)> = vec![(Vec::new(), Vec::new())];
    for depth in 0..=max_len {
        for (seq, bytes) in &layer {
            if accept(bytes) {
                let mut s = seq.clone();
                if terminated {
                    s.push(vocab.eos_id());
                }
                out.insert(s);
            }
        }
        if depth == max_len {
            break;
        }
        layer = layer
            .iter()
            .flat_map(|(seq, bytes)| {
                ids.iter().map(move |&t| {
                    let mut s = seq.clone();
                    s.push(t);
                    let mut b = bytes.clone();
                    b.extend_from_slice(vocab.bytes(t).unwrap());
                    (s, b)
                })
            })
            .collect();
    }
    out
}

// ---- scoring

/// Σ max(0, −log p(tᵢ | prompt, t₁..tᵢ₋₁)) in sequence order; `None` when
/// some step has zero probability.
pub fn path_cost<S: Scorer>(scorer: &S, prompt: &[TokenId], tokens: &[TokenId]) -> Option<f64> {
    let mut ctx = prompt.to_vec();
    let mut cost = 0.0;
    for &t in tokens {
        let lp = scorer.next_logprobs(&ctx).unwrap()[t as usize];
        if lp == f64::NEG_INFINITY {
            return None;
        }
        cost += (-lp).max(0.0);
        ctx.push(t);
    }
    Some(cost)
}

/// The `k` highest-scoring ids, ties to the lower id.
pub fn top_k_oracle(logprobs: &[f64], k: usize) -> BTreeSet<TokenId> {
    let mut ids: Vec<usize> = (0..logprobs.len()).collect();
    ids.sort_by(|&a, &b| logprobs[b].partial_cmp(&logprobs[a]).unwrap().then(a.cmp(&b)));
    ids.into_iter().take(k).map(|i| i as TokenId).collect()
}

/// All `accepted` sequences sorted by (cost, tokens), dropping unreachable ones.
pub fn brute_ranked<S: Scorer>(
    scorer: &S,
    prompt: &[TokenId],
    accepted: &BTreeSet<Vec<TokenId>>,
) -> Vec<(f64, Vec<TokenId>)> {
    let mut scored: Vec<(f64, Vec<TokenId>)> = accepted
        .iter()
        .filter_map(|seq| path_cost(scorer, prompt, seq).map(|c| (c, seq.clone())))
        .collect();
    scored.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
    scored
}

/// Exact output distribution of the constrained sampler over a finite
/// token language, found by walking the tree of prefixes of `accepted`.
///
/// At each prefix the options are the tokens that keep it a prefix of some
/// accepted sequence, weighted by the model's probabilities; in
/// non-terminated mode an accepted prefix may also stop, weighted by the
/// model's EOS probability. Walks with no options end there: as a match if
/// the prefix is accepted, otherwise as lost mass (a dead end).
pub fn exact_sampler_distribution<S: Scorer>(
    scorer: &S,
    eos: TokenId,
    prompt: &[TokenId],
    accepted: &BTreeSet<Vec<TokenId>>,
    terminated: bool,
) -> BTreeMap<Vec<TokenId>, f64> {
    let mut out = BTreeMap::new();
    walk_exact(scorer, eos, prompt, accepted, terminated, Vec::new(), 1.0, &mut out);
    out
}

#[allow(clippy::too_many_arguments)]
fn walk_exact<S: Scorer>(
    scorer: &S,
    eos: TokenId,
    prompt: &[TokenId],
    accepted: &BTreeSet<Vec<TokenId>>,
    terminated: bool,
    prefix: Vec<TokenId>,
    mass: f64,
    out: &mut BTreeMap<Vec<TokenId>, f64>,
) {
    let is_accepted = accepted.contains(&prefix);
    if terminated && is_accepted {
        *out.entry(prefix).or_default() += mass;
        return;
    }
    let next: BTreeSet<TokenId> = accepted
        .iter()
        .filter(|s| s.len() > prefix.len() && s.starts_with(&prefix))
        .map(|s| s[prefix.len()])
        .collect();
    if next.is_empty() {
        if is_accepted {
            *out.entry(prefix).or_default() += mass;
        }
        return;
    }
    let mut ctx = prompt.to_vec();
    ctx.extend_from_slice(&prefix);
    let lp = scorer.next_logprobs(&ctx).unwrap();
    let mut options: Vec<(Option<TokenId>, f64)> = next.iter().map(|&t| (Some(t), lp[t as usize].exp())).collect();
    if is_accepted {
        options.push((None, lp[eos as usize].exp()));
    }
    let total: f64 = options.iter().map(|o| o.1).sum();
    if total <= 0.0 {
        if is_accepted {
            *out.entry(prefix).or_default() += mass;
        }
        return;
    }
    for (opt, w) in options {
        if w <= 0.0 {
            continue;
        }
        let m = mass * w / total;
        match opt {
            None => *out.entry(prefix.clone()).or_default() += m,
            Some(t) => {
                let mut p = prefix.clone();
                p.push(t);
                walk_exact(scorer, eos, prompt, accepted, terminated, p, m, out);
            }
        }
    }
}

/// Total-variation distance between an empirical count table and a
/// distribution.
pub fn total_variation<K: Ord>(counts: &BTreeMap<K, usize>, exact: &BTreeMap<K, f64>) -> f64 {
    let n: usize = counts.values().sum();
    let mut keys: BTreeSet<&K> = counts.keys().collect();
    keys.extend(exact.keys());
    0.5 * keys
        .into_iter()
        .map(|k| {
            let p = counts.get(k).map_or(0.0, |&c| c as f64 / n as f64);
            let q = exact.get(k).copied().unwrap_or(0.0);
            (p - q).abs()
        })
        .sum::<f64>()
}

/// A normalized probability vector with random, strictly positive entries.
pub fn random_probs(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..1.0f64)).collect();
    let z: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / z).collect()
}
