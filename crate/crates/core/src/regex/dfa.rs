//! Byte-level DFA: subset construction, partition-refinement minimization,
//! matching, and text/DOT output.

use std::collections::{HashMap, VecDeque};
use std::fmt::Write as _;

use thiserror::Error;

use super::nfa::{Nfa, NfaLabel, NfaStateId};

pub type StateId = u32;

const NONE: StateId = StateId::MAX;

/// Default cap on materialized DFA states.
pub const DEFAULT_MAX_DFA_STATES: usize = 1_000_000;

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("DFA construction exceeded the limit of {limit} states")]
pub struct StateLimitError {
    pub limit: usize,
}

/// A partial DFA over bytes: a missing transition rejects.
///
/// States are numbered in breadth-first order from the start state, with
/// successors visited in ascending byte order, so two compilations of the
/// same pattern produce identical tables.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Dfa {
    table: Vec<StateId>,
    accept: Vec<bool>,
    start: StateId,
}

impl Dfa {
    pub fn start(&self) -> StateId {
        self.start
    }

    pub fn num_states(&self) -> usize {
        self.accept.len()
    }

    pub fn is_accept(&self, s: StateId) -> bool {
        self.accept[s as usize]
    }

    pub fn accept_states(&self) -> impl Iterator<Item = StateId> + '_ {
        self.accept.iter().enumerate().filter(|(_, &a)| a).map(|(i, _)| i as StateId)
    }

    #[inline]
    pub fn next(&self, s: StateId, b: u8) -> Option<StateId> {
        let t = self.table[s as usize * 256 + b as usize];
        (t != NONE).then_some(t)
    }

    /// Outgoing `(byte, target)` pairs in byte order.
    pub fn transitions(&self, s: StateId) -> impl Iterator<Item = (u8, StateId)> + '_ {
        let row = &self.table[s as usize * 256..(s as usize + 1) * 256];
        row.iter().enumerate().filter(|(_, &t)| t != NONE).map(|(b, &t)| (b as u8, t))
    }

    pub fn num_transitions(&self) -> usize {
        self.table.iter().filter(|&&t| t != NONE).count()
    }

    /// Anchored full match.
    pub fn matches(&self, input: &[u8]) -> bool {
        let mut s = self.start;
        for &b in input {
            match self.next(s, b) {
                Some(t) => s = t,
                None => return false,
            }
        }
        self.is_accept(s)
    }

    /// Runs `input` from `from`, returning the landing state if every byte has a transition.
    pub fn walk(&self, from: StateId, input: &[u8]) -> Option<StateId> {
        input.iter().try_fold(from, |s, &b| self.next(s, b))
    }

    /// Line-oriented canonical form. Consecutive bytes sharing a target are
    /// written as one hex range.
    pub fn canonical(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "dfa states={} start={}", self.num_states(), self.start);
        let accepts: Vec<String> = self.accept_states().map(|s| s.to_string()).collect();
        let _ = writeln!(out, "accept {}", accepts.join(" "));
        for s in 0..self.num_states() as StateId {
            for (lo, hi, t) in self.ranges(s) {
                let _ = writeln!(out, "{s} {lo:02x}-{hi:02x} {t}");
            }
        }
        out
    }

    fn ranges(&self, s: StateId) -> Vec<(u8, u8, StateId)> {
        let mut out: Vec<(u8, u8, StateId)> = Vec::new();
        for (b, t) in self.transitions(s) {
            match out.last_mut() {
                Some(last) if last.2 == t && last.1 as u16 + 1 == b as u16 => last.1 = b,
                _ => out.push((b, b, t)),
            }
        }
        out
    }

    /// Graphviz rendering; accept states are double circles.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph dfa {\n  rankdir=LR;\n  __start [shape=point];\n");
        for s in 0..self.num_states() {
            let shape = if self.accept[s] { "doublecircle" } else { "circle" };
            let _ = writeln!(out, "  q{s} [shape={shape}, label=\"{s}\"];");
        }
        let _ = writeln!(out, "  __start -> q{};", self.start);
        for s in 0..self.num_states() as StateId {
            for (lo, hi, t) in self.ranges(s) {
                let _ = writeln!(out, "  q{s} -> q{t} [label=\"{}\"];", range_label(lo, hi));
            }
        }
        out.push_str("}\n");
        out
    }
}

/// Escaped DOT label for a byte or byte range.
pub(crate) fn range_label(lo: u8, hi: u8) -> String {
    if lo == hi {
        byte_label(lo)
    } else {
        format!("{}-{}", byte_label(lo), byte_label(hi))
    }
}

pub(crate) fn byte_label(b: u8) -> String {
    match b {
        b'"' => "\\\"".into(),
        b'\\' => "\\\\".into(),
        0x21..=0x7e => (b as char).to_string(),
        _ => format!("\\\\x{b:02x}"),
    }
}

/// Subset construction. Only subsets reachable from the start closure are
/// created and the empty (dead) subset is never materialized.
pub fn determinize(nfa: &Nfa, max_states: usize) -> Result<Dfa, StateLimitError> {
    let mut start_set = vec![nfa.start()];
    nfa.epsilon_closure(&mut start_set);

    let mut ids: HashMap<Vec<NfaStateId>, StateId> = HashMap::new();
    let mut subsets: Vec<Vec<NfaStateId>> = Vec::new();
    let mut table: Vec<StateId> = Vec::new();
    let mut queue = VecDeque::new();

    ids.insert(start_set.clone(), 0);
    subsets.push(start_set);
    table.extend(std::iter::repeat_n(NONE, 256));
    queue.push_back(0 as StateId);

    while let Some(id) = queue.pop_front() {
        let members = subsets[id as usize].clone();
        // Boundaries of every labeled range leaving this subset.
        let mut edges: Vec<(u8, u8, NfaStateId)> = Vec::new();
        for &s in &members {
            for &(label, t) in &nfa.state(s).edges {
                if let NfaLabel::Bytes(r) = label {
                    edges.push((r.lo, r.hi, t));
                }
            }
        }
        if edges.is_empty() {
            continue;
        }
        let mut cuts: Vec<u16> = Vec::with_capacity(edges.len() * 2);
        for &(lo, hi, _) in &edges {
            cuts.push(lo as u16);
            cuts.push(hi as u16 + 1);
        }
        cuts.sort_unstable();
        cuts.dedup();
        for w in cuts.windows(2) {
            let (lo, hi) = (w[0], w[1] - 1);
            let mut target: Vec<NfaStateId> = edges
                .iter()
                .filter(|&&(l, h, _)| l as u16 <= lo && hi <= h as u16)
                .map(|&(_, _, t)| t)
                .collect();
            if target.is_empty() {
                continue;
            }
            target.sort_unstable();
            target.dedup();
            nfa.epsilon_closure(&mut target);
            target.dedup();
            let tid = match ids.get(&target) {
                Some(&t) => t,
                None => {
                    if subsets.len() >= max_states {
                        return Err(StateLimitError { limit: max_states });
                    }
                    let t = subsets.len() as StateId;
                    ids.insert(target.clone(), t);
                    subsets.push(target);
                    table.extend(std::iter::repeat_n(NONE, 256));
                    queue.push_back(t);
                    t
                }
            };
            for b in lo..=hi {
                table[id as usize * 256 + b as usize] = tid;
            }
        }
    }

    let accept = subsets.iter().map(|set| set.iter().any(|&s| nfa.is_accept(s))).collect();
    Ok(Dfa { table, accept, start: 0 })
}

/// Minimizes by partition refinement after trimming states that cannot
/// reach an accept state. The result is the minimal partial DFA, numbered
/// canonically.
pub fn minimize(dfa: &Dfa) -> Dfa {
    let n = dfa.num_states();

    // co-reachability
    let mut reverse: Vec<Vec<StateId>> = vec![Vec::new(); n];
    for s in 0..n as StateId {
        for (_, t) in dfa.transitions(s) {
            reverse[t as usize].push(s);
        }
    }
    let mut live = dfa.accept.clone();
    let mut stack: Vec<StateId> = dfa.accept_states().collect();
    while let Some(t) = stack.pop() {
        for &s in &reverse[t as usize] {
            if !live[s as usize] {
                live[s as usize] = true;
                stack.push(s);
            }
        }
    }
    if !live[dfa.start as usize] {
        return Dfa { table: vec![NONE; 256], accept: vec![false], start: 0 };
    }

    // block[s] for live states; dead states behave like a missing transition
    let mut block: Vec<u32> = (0..n).map(|s| if dfa.accept[s] { 1 } else { 0 }).collect();
    let mut num_blocks = {
        let has_acc = dfa.accept.iter().zip(&live).any(|(&a, &l)| a && l);
        let has_rej = dfa.accept.iter().zip(&live).any(|(&a, &l)| !a && l);
        has_acc as usize + has_rej as usize
    };
    loop {
        let mut sig_ids: HashMap<(u32, Vec<u32>), u32> = HashMap::new();
        let mut next_block = vec![u32::MAX; n];
        for s in 0..n {
            if !live[s] {
                continue;
            }
            let row: Vec<u32> = (0..256)
                .map(|b| {
                    let t = dfa.table[s * 256 + b];
                    if t == NONE || !live[t as usize] {
                        u32::MAX
                    } else {
                        block[t as usize]
                    }
                })
                .collect();
            let key = (block[s], row);
            let fresh = sig_ids.len() as u32;
            next_block[s] = *sig_ids.entry(key).or_insert(fresh);
        }
        let count = sig_ids.len();
        block = next_block;
        if count == num_blocks {
            break;
        }
        num_blocks = count;
    }

    // Build the quotient, then renumber by BFS.
    let mut table = vec![NONE; num_blocks * 256];
    let mut accept = vec![false; num_blocks];
    for s in 0..n {
        if !live[s] {
            continue;
        }
        let bs = block[s] as usize;
        accept[bs] = dfa.accept[s];
        for b in 0..256 {
            let t = dfa.table[s * 256 + b];
            if t != NONE && live[t as usize] {
                table[bs * 256 + b] = block[t as usize];
            }
        }
    }
    renumber(&Dfa { table, accept, start: block[dfa.start as usize] })
}

/// Canonical BFS renumbering, dropping unreachable states.
fn renumber(dfa: &Dfa) -> Dfa {
    let n = dfa.num_states();
    let mut order = vec![NONE; n];
    let mut seq = Vec::with_capacity(n);
    order[dfa.start as usize] = 0;
    seq.push(dfa.start);
    let mut i = 0;
    while i < seq.len() {
        let s = seq[i];
        for (_, t) in dfa.transitions(s) {
            if order[t as usize] == NONE {
                order[t as usize] = seq.len() as StateId;
                seq.push(t);
            }
        }
        i += 1;
    }
    let mut table = vec![NONE; seq.len() * 256];
    let mut accept = vec![false; seq.len()];
    for (new, &old) in seq.iter().enumerate() {
        accept[new] = dfa.accept[old as usize];
        for (b, t) in dfa.transitions(old) {
            table[new * 256 + b as usize] = order[t as usize];
        }
    }
    Dfa { table, accept, start: 0 }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regex::{compile_nfa, parse_regex};

    fn dfa_of(p: &str) -> Dfa {
        determinize(&compile_nfa(&parse_regex(p).unwrap()), DEFAULT_MAX_DFA_STATES).unwrap()
    }

    fn strings(alphabet: &[u8], max_len: usize) -> Vec<Vec<u8>> {
        let mut all = vec![Vec::new()];
        let mut layer = vec![Vec::new()];
        for _ in 0..max_len {
            layer = layer
                .iter()
                .flat_map(|s: &Vec<u8>| {
                    alphabet.iter().map(move |&c| {
                        let mut t = s.clone();
                        t.push(c);
                        t
                    })
                })
                .collect();
            all.extend(layer.iter().cloned());
        }
        all
    }

    #[test]
    fn single_literal() {
        let d = dfa_of("a");
        assert_eq!(d.num_states(), 2);
        assert!(d.matches(b"a") && !d.matches(b"") && !d.matches(b"aa"));
    }

    #[test]
    fn empty_pattern() {
        let d = dfa_of("");
        assert!(d.is_accept(d.start()));
        assert_eq!(d.num_transitions(), 0);
    }

    #[test]
    fn subset_construction_agrees_with_nfa() {
        let nfa = compile_nfa(&parse_regex("(a|b)*abb").unwrap());
        let d = determinize(&nfa, DEFAULT_MAX_DFA_STATES).unwrap();
        for s in strings(b"ab", 6) {
            assert_eq!(d.matches(&s), nfa.matches(&s), "{:?}", String::from_utf8_lossy(&s));
        }
    }

    #[test]
    fn state_cap() {
        let nfa = compile_nfa(&parse_regex("(a|b)*a(a|b){8}").unwrap());
        assert_eq!(determinize(&nfa, 50), Err(StateLimitError { limit: 50 }));
    }

    #[test]
    fn minimize_two_symbol_product() {
        let naive = dfa_of("(a|b)(a|b)");
        let min = minimize(&naive);
        assert!(naive.num_states() > 3);
        assert_eq!(min.num_states(), 3);
        for s in strings(b"ab", 4) {
            assert_eq!(min.matches(&s), naive.matches(&s));
        }
    }

    #[test]
    fn minimize_fixpoint() {
        let d = minimize(&dfa_of("a"));
        assert_eq!(d.num_states(), 2);
        assert_eq!(minimize(&d), d);
    }

    #[test]
    fn dfa_matching_examples() {
        let the = minimize(&dfa_of("The"));
        assert!(the.matches(b"The"));
        assert!(!the.matches(b"Th"));
        assert!(minimize(&dfa_of("a*")).matches(b""));
    }

    #[test]
    fn canonical_is_stable() {
        let p = "https://[a-z]+(/[a-z]*)?";
        assert_eq!(minimize(&dfa_of(p)).canonical(), minimize(&dfa_of(p)).canonical());
    }

    #[test]
    fn dot_marks_accepts() {
        let dot = minimize(&dfa_of("ab")).to_dot();
        assert_eq!(dot.matches("doublecircle").count(), 1);
        assert_eq!(dot.matches(" -> q").count(), 3);
    }
}
