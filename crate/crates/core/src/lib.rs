//! Regular-expression queries over language models.
//!
//! A query is a regular expression over bytes. It is compiled to a minimal
//! DFA ([`regex`]), rewritten over a tokenizer's vocabulary into an
//! automaton whose edges are token ids ([`transducer`]), and then traversed
//! under a next-token scorer ([`scorer`]) either most-probable-first or by
//! constrained sampling ([`traversal`]). [`harness`] runs the memorization,
//! last-word prediction and bias experiments on top of these pieces.
//!
//! ```
//! use lmquery::prelude::*;
//!
//! let vocab = Vocabulary::from_strs(&["T", "h", "e", "Th", "he", "The"]);
//! let dfa = Dfa::compile("The").unwrap();
//! let ta = transduce(&dfa, &vocab, &TokenTrie::build(&vocab), &TransduceOptions::default()).unwrap();
//! let results = enumerate_shortest(QuerySpec::new(&ta, &vocab), UniformScorer::new(vocab.size()), 10).unwrap();
//! assert_eq!(results.len(), 4);
//! ```

pub mod harness;
pub mod regex;
pub mod scorer;
pub mod transducer;
pub mod traversal;
pub mod vocab;

pub mod prelude {
    pub use crate::regex::{dfa_matches, CompileError, Dfa};
    pub use crate::scorer::{
        FixtureScorer, NGramModel, RemoteScorer, Scorer, ScorerError, UniformScorer,
    };
    pub use crate::transducer::{transduce, TokenAutomaton, TransduceOptions};
    pub use crate::traversal::{
        enumerate_shortest, sample, MatchResult, Prompt, QuerySpec, SampleOutcome, ShortestPaths,
        TopKScope, TraversalError,
    };
    pub use crate::vocab::{TokenId, TokenTrie, Vocabulary};
}
