use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at offset {pos}: {msg}")]
    Parse { pos: usize, msg: String },

    #[error("unknown atomic proposition `{0}`")]
    UnknownAtom(String),

    #[error("negation can only be applied to atomic propositions: {0}")]
    NegationOfNonAtom(String),

    #[error("automaton exceeded the state cap of {cap} states")]
    StateBlowUp { cap: usize },

    #[error("alphabet mismatch: {0}")]
    AlphabetMismatch(String),

    #[error("state {0} cannot reach an accepting state but is not the sink")]
    NotCoaccessible(usize),

    #[error("task goal `{0}` cannot be expressed as a composition of atomic propositions")]
    NotComposable(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("goal and unsafe sets overlap in {count} state(s), e.g. state {example}")]
    OverlappingGoal { count: usize, example: usize },

    #[error(
        "value iteration did not converge after {iterations} iterations (residual {residual:e})"
    )]
    NotConverged { iterations: usize, residual: f64 },

    #[error("policy evaluation diverges: states {states:?} never reach an absorbing state but collect reward")]
    Divergent { states: Vec<usize> },

    #[error(
        "option `{option}` is not absorbing in automaton state {q}: recurrent states {states:?}"
    )]
    NotAbsorbing {
        option: String,
        q: usize,
        states: Vec<usize>,
    },

    #[error("invalid composition: {0}")]
    Composition(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("acceptance gate failed: {0}")]
    GateFailed(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(path: impl Into<PathBuf>, source: serde_json::Error) -> Self {
        Error::Json {
            path: path.into(),
            source,
        }
    }
}
