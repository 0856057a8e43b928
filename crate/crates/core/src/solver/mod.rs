//! Value iteration (softmax and hardmax), exact policy evaluation and
//! reach-probability optimization over a generic [`ChoiceModel`].

mod linear;
mod model;
mod reach;
mod vi;

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::mdp::SspTask;
use crate::options::OptionPolicy;

pub(crate) use linear::solve_absorbing;
pub use linear::{policy_eval, DENSE_LIMIT};
pub use model::{Choice, ChoiceId, ChoiceModel};
pub use reach::max_reach;
pub use vi::{
    bellman_residual, extract_policy, hardmax_vi, log_sum_exp, softmax_vi, value_iteration,
    Operator, TracePoint, ValueFunction, ViConfig, DEFAULT_MAX_ITER, DEFAULT_TOL,
};

/// Stochastic policy: per state, a distribution over choice ids.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Policy {
    pub rows: Vec<Vec<(ChoiceId, f64)>>,
}

impl Policy {
    pub fn num_states(&self) -> usize {
        self.rows.len()
    }

    pub fn prob(&self, s: usize, id: ChoiceId) -> f64 {
        self.rows[s].iter().filter(|e| e.0 == id).map(|e| e.1).sum()
    }

    /// Uniform distribution over each state's choices.
    pub fn uniform(model: &ChoiceModel) -> Self {
        Policy {
            rows: model
                .choices
                .iter()
                .map(|cs| {
                    let p = 1.0 / cs.len() as f64;
                    cs.iter().map(|c| (c.id, p)).collect()
                })
                .collect(),
        }
    }
}

/// `Q_i(s, o_j)`: expected discounted task-`i` reward of running option `j`
/// from `s` until it terminates or task `i` absorbs. Zero where either
/// happens immediately.
pub fn cross_q(task: &SspTask, option: &OptionPolicy) -> Result<Vec<f64>> {
    let n = task.mdp.num_states();
    if option.policy.num_states() != n || option.termination.len() != n {
        return Err(Error::InvalidParameter(format!(
            "option `{}` covers {} states, task has {n}",
            option.name,
            option.policy.num_states()
        )));
    }
    let mut model = ChoiceModel::from_ssp(task);
    model.pin(option.termination.mask());
    let mut v = policy_eval(&model, &option.policy)?;
    for (s, x) in v.iter_mut().enumerate() {
        if model.pinned[s] {
            *x = 0.0;
        }
    }
    Ok(v)
}

pub fn values_csv(values: &[f64]) -> String {
    let mut out = String::from("state,value\n");
    for (s, v) in values.iter().enumerate() {
        writeln!(out, "{s},{v}").unwrap();
    }
    out
}

/// `state,action,prob` rows; options are written as `o<id>`.
pub fn policy_csv(policy: &Policy) -> String {
    let mut out = String::from("state,action,prob\n");
    for (s, row) in policy.rows.iter().enumerate() {
        for &(id, p) in row {
            let id = match id {
                ChoiceId::Action(a) => a.to_string(),
                ChoiceId::Option(o) => format!("o{o}"),
            };
            writeln!(out, "{s},{id},{p}").unwrap();
        }
    }
    out
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::linear::FixedPoint;
    use super::*;

    fn chain(len: usize, gamma: f64, alpha: f64) -> ChoiceModel {
        // States 0..len-1 walk right deterministically; `len` is the goal.
        let mut choices = Vec::new();
        for s in 0..len {
            let reward = if s + 1 == len { alpha } else { 0.0 };
            choices.push(vec![Choice {
                id: ChoiceId::Action(0),
                reward,
                next: vec![(s + 1, gamma)],
            }]);
        }
        choices.push(Vec::new());
        let mut pinned = vec![false; len + 1];
        pinned[len] = true;
        ChoiceModel { choices, pinned }
    }

    #[test]
    fn softmax_single_action_chain() {
        let m = chain(1, 0.9, 100.0);
        let (v, pi) = softmax_vi(&m, 1.0, &ViConfig::default()).unwrap();
        assert!((v.values[0] - 100.0).abs() < 1e-9);
        assert_eq!(v.values[1], 0.0);
        assert_eq!(pi.rows[0], vec![(ChoiceId::Action(0), 1.0)]);
        let m = chain(2, 0.9, 100.0);
        let (v, _) = softmax_vi(&m, 1.0, &ViConfig::default()).unwrap();
        assert!((v.values[1] - 100.0).abs() < 1e-9);
        assert!((v.values[0] - 90.0).abs() < 1e-9);
    }

    #[test]
    fn hardmax_chain_closed_form() {
        for k in 1..=5 {
            let m = chain(k, 0.9, 1.0);
            let (v, _) = hardmax_vi(&m, &ViConfig::with_tol(1e-12)).unwrap();
            assert!((v.values[0] - 0.9f64.powi(k as i32 - 1)).abs() < 1e-12);
        }
    }

    #[test]
    fn unreachable_goal_is_zero() {
        let m = ChoiceModel {
            choices: vec![
                vec![Choice {
                    id: ChoiceId::Action(0),
                    reward: 0.0,
                    next: vec![(0, 1.0)],
                }],
                Vec::new(),
            ],
            pinned: vec![false, true],
        };
        let (v, _) = hardmax_vi(&m, &ViConfig::default()).unwrap();
        assert_eq!(v.values, vec![0.0, 0.0]);
        let pi = Policy::uniform(&m);
        assert_eq!(policy_eval(&m, &pi).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn uniform_q_gives_uniform_policy() {
        let c = |a| Choice {
            id: ChoiceId::Action(a),
            reward: 1.0,
            next: vec![(1, 0.9)],
        };
        let m = ChoiceModel {
            choices: vec![vec![c(0), c(1), c(2)], Vec::new()],
            pinned: vec![false, true],
        };
        let (_, pi) = softmax_vi(&m, 1.0, &ViConfig::default()).unwrap();
        for &(_, p) in &pi.rows[0] {
            assert!((p - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    fn fork(p_goal: f64) -> ChoiceModel {
        // 0 -> {goal 1, unsafe 2}
        ChoiceModel {
            choices: vec![
                vec![Choice {
                    id: ChoiceId::Action(0),
                    reward: p_goal,
                    next: vec![(1, p_goal), (2, 1.0 - p_goal)],
                }],
                Vec::new(),
                Vec::new(),
            ],
            pinned: vec![false, true, true],
        }
    }

    #[test]
    fn policy_eval_reach_probabilities() {
        for (p, want) in [(1.0, 1.0), (0.0, 0.0), (0.5, 0.5)] {
            let m = fork(p);
            let v = policy_eval(&m, &Policy::uniform(&m)).unwrap();
            assert!((v[0] - want).abs() < 1e-12);
        }
    }

    #[test]
    fn divergence_guard() {
        let m = ChoiceModel {
            choices: vec![vec![Choice {
                id: ChoiceId::Action(0),
                reward: 1.0,
                next: vec![(0, 1.0)],
            }]],
            pinned: vec![false],
        };
        assert!(matches!(
            policy_eval(&m, &Policy::uniform(&m)),
            Err(Error::Divergent { .. })
        ));
    }

    #[test]
    fn max_reach_avoids_idle_loop() {
        // State 0 can idle (action 0) or move to 1, which reaches the goal.
        let m = ChoiceModel {
            choices: vec![
                vec![
                    Choice {
                        id: ChoiceId::Action(0),
                        reward: 0.0,
                        next: vec![(0, 1.0)],
                    },
                    Choice {
                        id: ChoiceId::Action(1),
                        reward: 0.0,
                        next: vec![(1, 1.0)],
                    },
                ],
                vec![Choice {
                    id: ChoiceId::Action(0),
                    reward: 1.0,
                    next: vec![(2, 1.0)],
                }],
                Vec::new(),
            ],
            pinned: vec![false, false, true],
        };
        let (_, pi, exact) = max_reach(&m, &ViConfig::with_tol(1e-10)).unwrap();
        assert_eq!(pi.rows[0], vec![(ChoiceId::Action(1), 1.0)]);
        assert!((exact[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gauss_seidel_matches_dense() {
        let n = DENSE_LIMIT + 10;
        let mut sys = FixedPoint::new(n);
        for i in 0..n {
            sys.b[i] = 1.0;
            sys.w[i] = vec![((i + 1) % n, 0.5)];
        }
        let x = sys.solve().unwrap();
        assert!(x.iter().all(|v| (v - 2.0).abs() < 1e-8));
    }
}
