//! Regex dialect → byte-level minimal DFA.

mod ast;
mod dfa;
mod nfa;

pub use ast::{
    escape, parse_regex, parse_regex_with_cap, ByteClass, ByteRange, RegexAst, SyntaxError,
    SyntaxErrorKind, DEFAULT_MAX_REPEAT,
};
pub use dfa::{determinize, minimize, Dfa, StateId, StateLimitError, DEFAULT_MAX_DFA_STATES};
pub use nfa::{compile_nfa, Nfa, NfaLabel, NfaState, NfaStateId};

pub(crate) use dfa::byte_label;

use thiserror::Error;

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum CompileError {
    #[error(transparent)]
    Syntax(#[from] SyntaxError),
    #[error(transparent)]
    StateLimit(#[from] StateLimitError),
}

#[derive(Clone, Copy, Debug)]
pub struct CompileOptions {
    pub max_dfa_states: usize,
    pub max_repeat: u32,
}

impl Default for CompileOptions {
    fn default() -> Self {
        CompileOptions { max_dfa_states: DEFAULT_MAX_DFA_STATES, max_repeat: DEFAULT_MAX_REPEAT }
    }
}

impl Dfa {
    /// parse → Thompson NFA → subset construction → minimization.
    pub fn compile(pattern: &str) -> Result<Dfa, CompileError> {
        Self::compile_with(pattern, &CompileOptions::default())
    }

    pub fn compile_with(pattern: &str, opts: &CompileOptions) -> Result<Dfa, CompileError> {
        let ast = parse_regex_with_cap(pattern, opts.max_repeat)?;
        let nfa = compile_nfa(&ast);
        Ok(minimize(&determinize(&nfa, opts.max_dfa_states)?))
    }
}

/// Anchored full match of `input` against `dfa`.
pub fn dfa_matches(dfa: &Dfa, input: &[u8]) -> bool {
    dfa.matches(input)
}
