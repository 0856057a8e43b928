use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::GridWorldSpec;
use crate::options::{DEFAULT_ETA_AND, DEFAULT_ETA_OR};
use crate::solver::{DEFAULT_MAX_ITER, DEFAULT_TOL};

/// The bundled 6x8 layout.
pub const BUNDLED_GRID: &str = include_str!("../../data/gridworld_6x8.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub name: String,
    pub formula: String,
}

/// Experiment parameters. Every field has a default, so `{}` is a valid
/// configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Grid layout file; the bundled layout when absent.
    pub grid: Option<PathBuf>,
    pub tasks: Vec<TaskSpec>,
    /// Strengthen `!C U F(...)` so the guard holds until the task is done.
    pub guard_eventualities: bool,
    pub gamma: f64,
    pub tau: f64,
    pub alpha: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub eta_or: f64,
    pub eta_and: f64,
    /// Atoms whose options are composed in the composition study.
    pub composition_operands: [String; 2],
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let task = |name: &str, formula: &str| TaskSpec {
            name: name.into(),
            formula: formula.into(),
        };
        ExperimentConfig {
            grid: None,
            tasks: vec![
                task("phi1", "!C U F(s1 & (F s2 & F s3))"),
                task("phi2", "!C U F((s1 | s3) & F s2)"),
                task("phi3", "!C U F((s1 | s2) & F (s2 & s3))"),
            ],
            guard_eventualities: true,
            gamma: 0.9,
            tau: 1.0,
            alpha: 100.0,
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
            eta_or: DEFAULT_ETA_OR,
            eta_and: DEFAULT_ETA_AND,
            composition_operands: ["s2".into(), "s3".into()],
            seed: 0,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::json(path, e))
    }

    pub fn grid_spec(&self) -> Result<GridWorldSpec> {
        match &self.grid {
            Some(p) => GridWorldSpec::load(p),
            None => {
                serde_json::from_str(BUNDLED_GRID).map_err(|e| Error::json("<bundled grid>", e))
            }
        }
    }
}
