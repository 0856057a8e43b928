use serde::{Deserialize, Serialize};

use super::model::ChoiceModel;
use super::Policy;
use crate::error::{Error, Result};

pub const DEFAULT_TOL: f64 = 1e-3;
pub const DEFAULT_MAX_ITER: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Operator {
    /// `tau * log sum exp(Q / tau)`.
    Softmax {
        tau: f64,
    },
    Hardmax,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ViConfig {
    pub tol: f64,
    pub max_iter: usize,
    /// Weights of the states whose value is recorded per iteration.
    pub monitor: Vec<(usize, f64)>,
}

impl Default for ViConfig {
    fn default() -> Self {
        ViConfig {
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
            monitor: Vec::new(),
        }
    }
}

impl ViConfig {
    pub fn with_tol(tol: f64) -> Self {
        ViConfig {
            tol,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub iteration: usize,
    pub value: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValueFunction {
    pub values: Vec<f64>,
    pub operator: Operator,
    pub iterations: usize,
    pub residual: f64,
    pub trace: Vec<TracePoint>,
}

/// log-sum-exp with max shift.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

pub(crate) fn backup(op: Operator, q: &[f64]) -> f64 {
    if q.is_empty() {
        return 0.0;
    }
    match op {
        Operator::Softmax { tau } => {
            let scaled: Vec<f64> = q.iter().map(|x| x / tau).collect();
            tau * log_sum_exp(&scaled)
        }
        Operator::Hardmax => q.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    }
}

/// Synchronous value iteration from `V = 0`, stopping when the sup-norm
/// change drops below `tol`.
pub fn value_iteration(model: &ChoiceModel, op: Operator, cfg: &ViConfig) -> Result<ValueFunction> {
    if let Operator::Softmax { tau } = op {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "temperature {tau} must be positive"
            )));
        }
    }
    if cfg.tol.is_nan() || cfg.tol <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "tolerance {} must be positive",
            cfg.tol
        )));
    }
    let n = model.num_states();
    let mut v = vec![0.0; n];
    let mut next = vec![0.0; n];
    let mut trace = Vec::new();
    let mut residual = f64::INFINITY;
    for k in 1..=cfg.max_iter {
        residual = 0.0;
        for s in 0..n {
            next[s] = if model.pinned[s] {
                0.0
            } else {
                backup(op, &model.q_row(s, &v))
            };
            residual = f64::max(residual, (next[s] - v[s]).abs());
        }
        std::mem::swap(&mut v, &mut next);
        if !residual.is_finite() {
            return Err(Error::NotConverged {
                iterations: k,
                residual,
            });
        }
        trace.push(TracePoint {
            iteration: k,
            value: cfg.monitor.iter().map(|&(s, w)| w * v[s]).sum(),
            residual,
        });
        if residual < cfg.tol {
            return Ok(ValueFunction {
                values: v,
                operator: op,
                iterations: k,
                residual,
                trace,
            });
        }
    }
    Err(Error::NotConverged {
        iterations: cfg.max_iter,
        residual,
    })
}

/// Greedy policy for `op` with respect to `values`: Boltzmann weights
/// `exp((Q - V) / tau)` for softmax, lowest-id argmax for hardmax.
/// Defined on every state with choices, pinned ones included.
pub fn extract_policy(model: &ChoiceModel, values: &[f64], op: Operator) -> Policy {
    let rows = (0..model.num_states())
        .map(|s| {
            let cs = &model.choices[s];
            if cs.is_empty() {
                return Vec::new();
            }
            let q = model.q_row(s, values);
            match op {
                Operator::Softmax { tau } => {
                    let m = q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    let w: Vec<f64> = q.iter().map(|x| ((x - m) / tau).exp()).collect();
                    let z: f64 = w.iter().sum();
                    cs.iter().zip(w).map(|(c, w)| (c.id, w / z)).collect()
                }
                Operator::Hardmax => {
                    let best = argmax_lowest_id(model, s, &q);
                    vec![(cs[best].id, 1.0)]
                }
            }
        })
        .collect();
    Policy { rows }
}

/// Index of the best choice; ties within 1e-12 go to the lowest id.
pub(crate) fn argmax_lowest_id(model: &ChoiceModel, s: usize, q: &[f64]) -> usize {
    let m = q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let eps = 1e-12 * m.abs().max(1.0);
    (0..q.len())
        .filter(|&i| q[i] >= m - eps)
        .min_by_key(|&i| model.choices[s][i].id)
        .unwrap()
}

/// Softmax value iteration followed by Boltzmann policy extraction.
pub fn softmax_vi(
    model: &ChoiceModel,
    tau: f64,
    cfg: &ViConfig,
) -> Result<(ValueFunction, Policy)> {
    let op = Operator::Softmax { tau };
    let vf = value_iteration(model, op, cfg)?;
    let pi = extract_policy(model, &vf.values, op);
    Ok((vf, pi))
}

pub fn hardmax_vi(model: &ChoiceModel, cfg: &ViConfig) -> Result<(ValueFunction, Policy)> {
    let vf = value_iteration(model, Operator::Hardmax, cfg)?;
    let pi = extract_policy(model, &vf.values, Operator::Hardmax);
    Ok((vf, pi))
}

/// Largest violation of `V = backup(Q(V))` over non-pinned states.
pub fn bellman_residual(model: &ChoiceModel, values: &[f64], op: Operator) -> f64 {
    (0..model.num_states())
        .filter(|&s| !model.pinned[s])
        .map(|s| (values[s] - backup(op, &model.q_row(s, values))).abs())
        .fold(0.0, f64::max)
}
