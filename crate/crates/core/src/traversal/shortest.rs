use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::{check_shape, MatchResult, Prompt, QuerySpec, TraversalError};
use crate::scorer::Scorer;
use crate::vocab::TokenId;

#[derive(Debug)]
struct SearchNode {
    cost: f64,
    tokens: Vec<TokenId>,
    state: u32,
}

// Min-heap order on (cost, tokens, length). `Vec` ordering already puts a
// prefix before its extensions.
impl Ord for SearchNode {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .cost
            .total_cmp(&self.cost)
            .then_with(|| other.tokens.cmp(&self.tokens))
            .then_with(|| other.tokens.len().cmp(&self.tokens.len()))
    }
}

impl PartialOrd for SearchNode {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for SearchNode {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for SearchNode {}

/// Lazy stream of accepted sequences, most probable first.
///
/// The search runs over the prefix tree of token sequences (each node
/// labeled with its automaton state), so no sequence is ever produced twice.
/// Results come out in nondecreasing cost; equal costs are ordered by
/// token ids lexicographically, then by length.
pub struct ShortestPaths<'q, S> {
    spec: QuerySpec<'q>,
    scorer: S,
    prompt: Vec<TokenId>,
    heap: BinaryHeap<SearchNode>,
    /// Last emitted node; expanded lazily so that taking `n` results never
    /// scores the children of the `n`-th.
    pending: Option<SearchNode>,
    emitted: usize,
    failed: bool,
}

impl<'q, S: Scorer> ShortestPaths<'q, S> {
    pub fn new(spec: QuerySpec<'q>, scorer: S) -> Result<Self, TraversalError> {
        spec.validate()?;
        let prompt = match &spec.prompt {
            Prompt::Fixed(p) => p.clone(),
            Prompt::UniformChoice(_) => {
                return Err(TraversalError::InvalidQuery(
                    "ordered enumeration needs a fixed prompt".into(),
                ))
            }
        };
        let mut heap = BinaryHeap::new();
        if !spec.automaton.is_empty_language() {
            heap.push(SearchNode { cost: 0.0, tokens: Vec::new(), state: spec.automaton.start() });
        }
        Ok(ShortestPaths { spec, scorer, prompt, heap, pending: None, emitted: 0, failed: false })
    }

    /// Frontier size, for diagnostics.
    pub fn frontier_len(&self) -> usize {
        self.heap.len()
    }

    fn expand(&mut self, node: &SearchNode) -> Result<(), TraversalError> {
        let ta = self.spec.automaton;
        if node.tokens.len() >= self.spec.max_match_tokens || ta.edges(node.state).is_empty() {
            return Ok(());
        }
        let mut context = self.prompt.clone();
        context.extend_from_slice(&node.tokens);
        let lp = self.scorer.next_logprobs(&context)?;
        check_shape(&lp, self.spec.vocab)?;
        for (t, to) in self.spec.allowed_edges(node.state, &lp) {
            let mut tokens = node.tokens.clone();
            tokens.push(t);
            let step = (-lp[t as usize]).max(0.0);
            self.heap.push(SearchNode { cost: node.cost + step, tokens, state: to });
        }
        Ok(())
    }
}

impl<S: Scorer> Iterator for ShortestPaths<'_, S> {
    type Item = Result<MatchResult, TraversalError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed {
            return None;
        }
        if let Some(node) = self.pending.take() {
            if let Err(e) = self.expand(&node) {
                self.failed = true;
                return Some(Err(e));
            }
        }
        while let Some(node) = self.heap.pop() {
            if !self.spec.automaton.is_accept(node.state) {
                if let Err(e) = self.expand(&node) {
                    self.failed = true;
                    return Some(Err(e));
                }
                continue;
            }
            self.emitted += 1;
            let decoded = match self.spec.vocab.decode(&node.tokens) {
                Ok(d) => d,
                Err(e) => {
                    self.failed = true;
                    return Some(Err(e.into()));
                }
            };
            let result = MatchResult {
                logprob: -node.cost,
                decoded,
                tokens: node.tokens.clone(),
                rank: self.emitted,
            };
            self.pending = Some(node);
            return Some(Ok(result));
        }
        None
    }
}

/// The first `limit` results of ordered enumeration.
pub fn enumerate_shortest<S: Scorer>(
    spec: QuerySpec<'_>,
    scorer: S,
    limit: usize,
) -> Result<Vec<MatchResult>, TraversalError> {
    ShortestPaths::new(spec, scorer)?.take(limit).collect()
}
