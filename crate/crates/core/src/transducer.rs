//! Byte DFA × vocabulary → token automaton.
//!
//! For each DFA state the token trie is walked in lockstep with the DFA, so
//! tokens sharing a prefix share the work. A token `t` gets an edge
//! `q --t--> q'` exactly when its bytes drive the DFA from `q` to `q'`.

use std::collections::{BTreeSet, HashSet};
use std::fmt::Write as _;

use thiserror::Error;

use crate::regex::{byte_label, Dfa, StateId};
use crate::vocab::{TokenId, TokenTrie, Vocabulary};

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum TransduceError {
    #[error("token automaton exceeded the limit of {limit} states")]
    TooManyStates { limit: usize },
    #[error("token automaton exceeded the limit of {limit} edges")]
    TooManyEdges { limit: usize },
    #[error("the EOS token {0} cannot be denied in a terminated automaton")]
    EosDenied(TokenId),
}

#[derive(Clone, Debug)]
pub struct TransduceOptions {
    /// Require a trailing EOS token and accept only after it.
    pub terminated: bool,
    /// Token ids never used as edges.
    pub deny_list: HashSet<TokenId>,
    pub max_states: usize,
    pub max_edges: usize,
}

impl Default for TransduceOptions {
    fn default() -> Self {
        TransduceOptions {
            terminated: false,
            deny_list: HashSet::new(),
            max_states: 1_000_000,
            max_edges: 50_000_000,
        }
    }
}

impl TransduceOptions {
    pub fn terminated(terminated: bool) -> Self {
        TransduceOptions { terminated, ..Default::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TaState {
    /// Originating DFA state; `None` for the EOS sink.
    pub dfa_state: Option<StateId>,
    /// Sorted by token id.
    pub edges: Vec<(TokenId, u32)>,
    pub accept: bool,
}

/// Automaton over token ids accepting exactly the token sequences whose
/// decoded bytes the source DFA accepts (followed by a single EOS when
/// `terminated`). Every state is reachable and co-reachable; an automaton
/// with an empty language keeps only its start state.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TokenAutomaton {
    states: Vec<TaState>,
    start: u32,
    terminated: bool,
    eos_id: TokenId,
}

impl TokenAutomaton {
    pub fn start(&self) -> u32 {
        self.start
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn num_edges(&self) -> usize {
        self.states.iter().map(|s| s.edges.len()).sum()
    }

    pub fn terminated(&self) -> bool {
        self.terminated
    }

    pub fn eos_id(&self) -> TokenId {
        self.eos_id
    }

    pub fn state(&self, s: u32) -> &TaState {
        &self.states[s as usize]
    }

    pub fn is_accept(&self, s: u32) -> bool {
        self.states[s as usize].accept
    }

    pub fn edges(&self, s: u32) -> &[(TokenId, u32)] {
        &self.states[s as usize].edges
    }

    pub fn next(&self, s: u32, token: TokenId) -> Option<u32> {
        let edges = &self.states[s as usize].edges;
        edges.binary_search_by_key(&token, |&(t, _)| t).ok().map(|i| edges[i].1)
    }

    pub fn is_empty_language(&self) -> bool {
        !self.states.iter().any(|s| s.accept)
    }

    /// Whether the whole sequence is accepted. Unknown ids simply fail.
    pub fn accepts(&self, tokens: &[TokenId]) -> bool {
        tokens
            .iter()
            .try_fold(self.start, |s, &t| self.next(s, t))
            .is_some_and(|s| self.is_accept(s))
    }

    /// Line-oriented canonical form used for golden comparisons.
    pub fn canonical(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "token-automaton states={} edges={} start={} terminated={} eos={}",
            self.num_states(),
            self.num_edges(),
            self.start,
            self.terminated,
            self.eos_id
        );
        let accepts: Vec<String> = (0..self.states.len())
            .filter(|&s| self.states[s].accept)
            .map(|s| s.to_string())
            .collect();
        let _ = writeln!(out, "accept {}", accepts.join(" "));
        for (i, st) in self.states.iter().enumerate() {
            let origin = st.dfa_state.map_or_else(|| "eos".to_string(), |q| q.to_string());
            let _ = writeln!(out, "state {i} dfa={origin}");
            for &(t, to) in &st.edges {
                let _ = writeln!(out, "{i} {t} {to}");
            }
        }
        out
    }

    /// Graphviz rendering. Edge labels carry the token id and its decoded bytes.
    pub fn to_dot(&self, vocab: &Vocabulary) -> String {
        let mut out = String::from("digraph token_automaton {\n  rankdir=LR;\n");
        for (i, st) in self.states.iter().enumerate() {
            let shape = if st.accept { "doublecircle" } else { "circle" };
            let _ = writeln!(out, "  s{i} [shape={shape}, label=\"{i}\"];");
        }
        for (i, st) in self.states.iter().enumerate() {
            for &(t, to) in &st.edges {
                let text: String = if t == self.eos_id {
                    "<EOS>".into()
                } else {
                    vocab.bytes(t).unwrap_or_default().iter().map(|&b| byte_label(b)).collect()
                };
                let _ = writeln!(out, "  s{i} -> s{to} [label=\"{t}:{text}\"];");
            }
        }
        out.push_str("}\n");
        out
    }
}

/// Builds the token automaton for `dfa` under `vocab`.
pub fn transduce(
    dfa: &Dfa,
    vocab: &Vocabulary,
    trie: &TokenTrie,
    opts: &TransduceOptions,
) -> Result<TokenAutomaton, TransduceError> {
    let eos = vocab.eos_id();
    if opts.terminated && opts.deny_list.contains(&eos) {
        return Err(TransduceError::EosDenied(eos));
    }

    // Raw graph indexed by DFA state, plus one sink when terminated.
    let n = dfa.num_states();
    let sink = n as u32;
    let mut raw: Vec<Vec<(TokenId, u32)>> = Vec::with_capacity(n + 1);
    let mut total_edges = 0usize;
    for q in 0..n as StateId {
        let mut edges = token_edges(dfa, trie, q, &opts.deny_list);
        if opts.terminated && dfa.is_accept(q) {
            edges.push((eos, sink));
        }
        edges.sort_unstable();
        total_edges += edges.len();
        if total_edges > opts.max_edges {
            return Err(TransduceError::TooManyEdges { limit: opts.max_edges });
        }
        raw.push(edges);
    }
    raw.push(Vec::new());
    let accepting = |s: u32| {
        if opts.terminated {
            s == sink
        } else {
            (s as usize) < n && dfa.is_accept(s)
        }
    };

    // co-reachable set
    let mut reverse: Vec<Vec<u32>> = vec![Vec::new(); n + 1];
    for (s, edges) in raw.iter().enumerate() {
        for &(_, t) in edges {
            reverse[t as usize].push(s as u32);
        }
    }
    let mut live = vec![false; n + 1];
    let mut stack: Vec<u32> = (0..=n as u32).filter(|&s| accepting(s)).collect();
    for &s in &stack {
        live[s as usize] = true;
    }
    while let Some(t) = stack.pop() {
        for &s in &reverse[t as usize] {
            if !live[s as usize] {
                live[s as usize] = true;
                stack.push(s);
            }
        }
    }

    // BFS from start over live states; edges in token order fix the numbering.
    let origin = dfa.start();
    let mut order = vec![u32::MAX; n + 1];
    let mut seq = vec![origin];
    order[origin as usize] = 0;
    if live[origin as usize] {
        let mut i = 0;
        while i < seq.len() {
            for &(_, t) in &raw[seq[i] as usize] {
                if live[t as usize] && order[t as usize] == u32::MAX {
                    if seq.len() >= opts.max_states {
                        return Err(TransduceError::TooManyStates { limit: opts.max_states });
                    }
                    order[t as usize] = seq.len() as u32;
                    seq.push(t);
                }
            }
            i += 1;
        }
    }

    let states = seq
        .iter()
        .map(|&old| {
            let is_live = live[old as usize];
            TaState {
                dfa_state: (old != sink).then_some(old),
                edges: if is_live {
                    raw[old as usize]
                        .iter()
                        .filter(|&&(_, t)| live[t as usize])
                        .map(|&(tok, t)| (tok, order[t as usize]))
                        .collect()
                } else {
                    Vec::new()
                },
                accept: accepting(old),
            }
        })
        .collect();
    Ok(TokenAutomaton { states, start: 0, terminated: opts.terminated, eos_id: eos })
}

/// All `(token, landing state)` pairs for tokens whose bytes stay on live
/// DFA transitions from `q`.
fn token_edges(dfa: &Dfa, trie: &TokenTrie, q: StateId, deny: &HashSet<TokenId>) -> Vec<(TokenId, u32)> {
    let mut out = Vec::new();
    let mut stack = vec![(TokenTrie::ROOT, q)];
    while let Some((node, state)) = stack.pop() {
        let n = trie.node(node);
        if node != TokenTrie::ROOT {
            out.extend(n.terminals().iter().filter(|t| !deny.contains(t)).map(|&t| (t, state)));
        }
        for &(b, child) in n.children() {
            if let Some(next) = dfa.next(state, b) {
                stack.push((child, next));
            }
        }
    }
    out
}

/// Every accepted token sequence of length ≤ `max_len`, in lexicographic order.
pub fn accepted_sequences(ta: &TokenAutomaton, max_len: usize) -> BTreeSet<Vec<TokenId>> {
    let mut out = BTreeSet::new();
    let mut stack: Vec<(u32, Vec<TokenId>)> = vec![(ta.start(), Vec::new())];
    while let Some((s, path)) = stack.pop() {
        if ta.is_accept(s) {
            out.insert(path.clone());
        }
        if path.len() == max_len {
            continue;
        }
        for &(t, to) in ta.edges(s) {
            let mut p = path.clone();
            p.push(t);
            stack.push((to, p));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> Vocabulary {
        Vocabulary::from_strs(&["T", "h", "e", "Th", "he", "The"])
    }

    fn build(pattern: &str, vocab: &Vocabulary, terminated: bool) -> TokenAutomaton {
        let dfa = Dfa::compile(pattern).unwrap();
        transduce(&dfa, vocab, &TokenTrie::build(vocab), &TransduceOptions::terminated(terminated))
            .unwrap()
    }

    #[test]
    fn four_tokenizations_of_the() {
        let v = toy();
        let ta = build("The", &v, false);
        let seqs = accepted_sequences(&ta, 10);
        let expected: BTreeSet<Vec<TokenId>> =
            [vec![5], vec![0, 4], vec![3, 2], vec![0, 1, 2]].into_iter().collect();
        assert_eq!(seqs, expected);
    }

    #[test]
    fn terminated_adds_eos_suffix() {
        let v = toy();
        let ta = build("The", &v, true);
        let seqs = accepted_sequences(&ta, 10);
        let expected: BTreeSet<Vec<TokenId>> =
            [vec![5, 6], vec![0, 4, 6], vec![3, 2, 6], vec![0, 1, 2, 6]].into_iter().collect();
        assert_eq!(seqs, expected);
        assert_eq!(ta.num_states(), build("The", &v, false).num_states() + 1);
    }

    #[test]
    fn acceptance() {
        let v = toy();
        let open = build("The", &v, false);
        let closed = build("The", &v, true);
        assert!(open.accepts(&[5]));
        assert!(!open.accepts(&[3]));
        assert!(!open.accepts(&[0, 1, 2, 6]));
        assert!(closed.accepts(&[0, 1, 2, 6]));
        assert!(!closed.accepts(&[0, 1, 2]));
        assert!(!open.accepts(&[42]));
    }

    #[test]
    fn deny_list_and_eos() {
        let v = toy();
        let dfa = Dfa::compile("The").unwrap();
        let trie = TokenTrie::build(&v);
        let opts = TransduceOptions { deny_list: [5].into_iter().collect(), ..Default::default() };
        let ta = transduce(&dfa, &v, &trie, &opts).unwrap();
        assert_eq!(accepted_sequences(&ta, 5).len(), 3);
        let opts = TransduceOptions {
            terminated: true,
            deny_list: [6].into_iter().collect(),
            ..Default::default()
        };
        assert_eq!(transduce(&dfa, &v, &trie, &opts), Err(TransduceError::EosDenied(6)));
    }

    #[test]
    fn unreachable_language_keeps_start_only() {
        let v = toy();
        let ta = build("xyz", &v, false);
        assert_eq!(ta.num_states(), 1);
        assert_eq!(ta.num_edges(), 0);
        assert!(ta.is_empty_language());
        let dot = ta.to_dot(&v);
        assert_eq!(dot.matches("->").count(), 0);
    }

    #[test]
    fn coreachability_prunes_dead_prefixes() {
        // "Th" leads nowhere once "e" is missing from the vocabulary.
        let v = Vocabulary::from_strs(&["T", "h", "Th", "The"]);
        let ta = build("The", &v, false);
        assert_eq!(accepted_sequences(&ta, 4).into_iter().collect::<Vec<_>>(), vec![vec![3]]);
        assert_eq!(ta.num_states(), 2);
    }

    #[test]
    fn duplicate_strings_get_parallel_edges() {
        let v = Vocabulary::from_strs(&["ab", "ab", "a", "b"]);
        let ta = build("ab", &v, false);
        let succ: Vec<_> = ta.edges(ta.start()).iter().filter(|e| e.0 < 2).map(|e| e.1).collect();
        assert_eq!(succ.len(), 2);
        assert_eq!(succ[0], succ[1]);
    }

    #[test]
    fn canonical_and_dot_shape() {
        let v = toy();
        let ta = build("The", &v, false);
        assert_eq!(ta.canonical(), build("The", &v, false).canonical());
        let dot = ta.to_dot(&v);
        assert_eq!(dot.matches("->").count(), ta.num_edges());
        assert_eq!(dot.matches("shape=").count(), ta.num_states());
    }
}
