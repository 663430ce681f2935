//! Thompson construction.

use std::fmt::Write as _;

use super::ast::{ByteRange, RegexAst};

pub type NfaStateId = u32;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NfaLabel {
    Epsilon,
    /// Any byte in the inclusive range.
    Bytes(ByteRange),
}

#[derive(Clone, Debug, Default)]
pub struct NfaState {
    pub edges: Vec<(NfaLabel, NfaStateId)>,
}

#[derive(Clone, Debug)]
pub struct Nfa {
    states: Vec<NfaState>,
    start: NfaStateId,
    accepts: Vec<NfaStateId>,
}

impl Nfa {
    pub fn start(&self) -> NfaStateId {
        self.start
    }

    pub fn accepts(&self) -> &[NfaStateId] {
        &self.accepts
    }

    pub fn is_accept(&self, s: NfaStateId) -> bool {
        self.accepts.contains(&s)
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn state(&self, s: NfaStateId) -> &NfaState {
        &self.states[s as usize]
    }

    /// Adds to `set` every state reachable from its members by epsilon edges.
    pub fn epsilon_closure(&self, set: &mut Vec<NfaStateId>) {
        let mut seen = vec![false; self.states.len()];
        for &s in set.iter() {
            seen[s as usize] = true;
        }
        let mut stack = set.clone();
        while let Some(s) = stack.pop() {
            for &(label, t) in &self.states[s as usize].edges {
                if label == NfaLabel::Epsilon && !seen[t as usize] {
                    seen[t as usize] = true;
                    set.push(t);
                    stack.push(t);
                }
            }
        }
        set.sort_unstable();
    }

    /// Direct simulation, used to cross-check determinization.
    pub fn matches(&self, input: &[u8]) -> bool {
        let mut current = vec![self.start];
        self.epsilon_closure(&mut current);
        for &b in input {
            let mut next: Vec<NfaStateId> = Vec::new();
            for &s in &current {
                for &(label, t) in &self.states[s as usize].edges {
                    if let NfaLabel::Bytes(r) = label {
                        if r.contains(b) && !next.contains(&t) {
                            next.push(t);
                        }
                    }
                }
            }
            if next.is_empty() {
                return false;
            }
            self.epsilon_closure(&mut next);
            current = next;
        }
        current.iter().any(|&s| self.is_accept(s))
    }

    /// Graphviz rendering; accept states are double circles.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph nfa {\n  rankdir=LR;\n  __start [shape=point];\n");
        for (i, _) in self.states.iter().enumerate() {
            let shape = if self.is_accept(i as NfaStateId) { "doublecircle" } else { "circle" };
            let _ = writeln!(out, "  n{i} [shape={shape}, label=\"{i}\"];");
        }
        let _ = writeln!(out, "  __start -> n{};", self.start);
        for (i, st) in self.states.iter().enumerate() {
            for &(label, t) in &st.edges {
                let text = match label {
                    NfaLabel::Epsilon => "ε".to_string(),
                    NfaLabel::Bytes(r) => super::dfa::range_label(r.lo, r.hi),
                };
                let _ = writeln!(out, "  n{i} -> n{t} [label=\"{text}\"];");
            }
        }
        out.push_str("}\n");
        out
    }
}

/// Builds a Thompson NFA with exactly one accept state.
pub fn compile_nfa(ast: &RegexAst) -> Nfa {
    let mut b = Builder { states: Vec::new() };
    let (start, end) = b.build(ast);
    Nfa { states: b.states, start, accepts: vec![end] }
}

struct Builder {
    states: Vec<NfaState>,
}

impl Builder {
    fn add(&mut self) -> NfaStateId {
        self.states.push(NfaState::default());
        (self.states.len() - 1) as NfaStateId
    }

    fn edge(&mut self, from: NfaStateId, label: NfaLabel, to: NfaStateId) {
        self.states[from as usize].edges.push((label, to));
    }

    /// Returns the (entry, exit) pair of the fragment.
    fn build(&mut self, ast: &RegexAst) -> (NfaStateId, NfaStateId) {
        match ast {
            RegexAst::Empty => {
                let s = self.add();
                (s, s)
            }
            RegexAst::Literal(b) => {
                let s = self.add();
                let e = self.add();
                self.edge(s, NfaLabel::Bytes(ByteRange::new(*b, *b)), e);
                (s, e)
            }
            RegexAst::Class(class) => {
                let s = self.add();
                let e = self.add();
                for &r in class.ranges() {
                    self.edge(s, NfaLabel::Bytes(r), e);
                }
                (s, e)
            }
            RegexAst::Concat(items) => {
                let mut iter = items.iter();
                let Some(first) = iter.next() else {
                    return self.build(&RegexAst::Empty);
                };
                let (start, mut end) = self.build(first);
                for item in iter {
                    let (s, e) = self.build(item);
                    self.edge(end, NfaLabel::Epsilon, s);
                    end = e;
                }
                (start, end)
            }
            RegexAst::Alternation(branches) => {
                let s = self.add();
                let e = self.add();
                for branch in branches {
                    let (bs, be) = self.build(branch);
                    self.edge(s, NfaLabel::Epsilon, bs);
                    self.edge(be, NfaLabel::Epsilon, e);
                }
                (s, e)
            }
            RegexAst::Star(child) => {
                let s = self.add();
                let e = self.add();
                let (cs, ce) = self.build(child);
                self.edge(s, NfaLabel::Epsilon, cs);
                self.edge(s, NfaLabel::Epsilon, e);
                self.edge(ce, NfaLabel::Epsilon, cs);
                self.edge(ce, NfaLabel::Epsilon, e);
                (s, e)
            }
            RegexAst::Plus(child) => {
                let (cs, ce) = self.build(child);
                let e = self.add();
                self.edge(ce, NfaLabel::Epsilon, cs);
                self.edge(ce, NfaLabel::Epsilon, e);
                (cs, e)
            }
            RegexAst::Optional(child) => {
                let s = self.add();
                let e = self.add();
                let (cs, ce) = self.build(child);
                self.edge(s, NfaLabel::Epsilon, cs);
                self.edge(s, NfaLabel::Epsilon, e);
                self.edge(ce, NfaLabel::Epsilon, e);
                (s, e)
            }
            RegexAst::Repeat { child, min, max } => {
                // x{m,n} = x^m (x?)^(n-m);  x{m,} = x^m x*
                let mut parts: Vec<RegexAst> = (0..*min).map(|_| (**child).clone()).collect();
                match max {
                    None => parts.push(RegexAst::Star(child.clone())),
                    Some(max) => {
                        for _ in *min..*max {
                            parts.push(RegexAst::Optional(child.clone()));
                        }
                    }
                }
                self.build(&RegexAst::Concat(parts))
            }
        }
    }
}
