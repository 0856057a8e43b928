//! Compositional planning for Markov decision processes under syntactically
//! co-safe LTL tasks.
//!
//! The pipeline runs in stages:
//!
//! * [`scltl`] parses formulas and compiles them to complete DFAs.
//! * [`taskdecomp`] ranks automaton states and splits the task into
//!   conditional-reachability subtasks, keeping the atomic ones as primitives.
//! * [`mdp`] holds labeled MDPs, the slippery grid world and SSP task binding.
//! * [`solver`] does softmax/hardmax value iteration and exact policy evaluation.
//! * [`options`] turns primitive tasks into options and composes them with
//!   generalized conjunction/disjunction.
//! * [`product`] builds the product MDP with micro- and macro-actions and runs
//!   the planners.
//! * [`harness`] reproduces the grid-world experiments end to end.

pub mod error;
pub mod harness;
pub mod mdp;
pub mod options;
pub mod product;
pub mod scltl;
pub mod solver;
pub mod taskdecomp;

pub use error::{Error, Result};
