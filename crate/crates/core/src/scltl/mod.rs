//! Syntactically co-safe LTL over finite words.
//!
//! Formulas are parsed against an [`Alphabet`] (the ordered list of atomic
//! propositions) and compiled to a complete [`Dfa`] by formula progression.
//! [`eval_word`] is the direct finite-trace semantics and serves as the
//! reference the automata are tested against.

mod dfa;
mod eval;
mod formula;
mod parse;
mod progression;

pub use dfa::{to_dfa, to_dfa_with_cap, Dfa, DfaFile, DEFAULT_STATE_CAP};
pub use eval::{eval_empty, eval_word};
pub use formula::{Alphabet, Formula, Symbol};
pub use parse::parse;
