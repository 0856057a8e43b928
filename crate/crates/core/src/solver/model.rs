use serde::{Deserialize, Serialize};

use crate::mdp::SspTask;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChoiceId {
    Action(usize),
    Option(usize),
}

/// One action or option available at a state.
///
/// `next` weights already include discounting, so they may sum to less than 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Choice {
    pub id: ChoiceId,
    pub reward: f64,
    pub next: Vec<(usize, f64)>,
}

/// Decision model shared by SSP tasks and the product: per-state choices and
/// a mask of pinned (absorbing, value 0) states.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ChoiceModel {
    pub choices: Vec<Vec<Choice>>,
    pub pinned: Vec<bool>,
}

impl ChoiceModel {
    pub fn num_states(&self) -> usize {
        self.choices.len()
    }

    pub fn choice(&self, s: usize, id: ChoiceId) -> Option<&Choice> {
        self.choices[s].iter().find(|c| c.id == id)
    }

    /// Micro-action model of a bound SSP task: reward `alpha * P(goal)`,
    /// successors discounted by `gamma`. Absorbing states keep their
    /// self-loops so a policy is still defined there.
    pub fn from_ssp(task: &SspTask) -> Self {
        Self::from_ssp_with(task, task.gamma, task.alpha)
    }

    /// Same as [`ChoiceModel::from_ssp`] with the discount and reward scale
    /// overridden, e.g. `(1, 1)` for reach probabilities.
    pub fn from_ssp_with(task: &SspTask, gamma: f64, alpha: f64) -> Self {
        let mdp = &task.mdp;
        let n = mdp.num_states();
        let choices = (0..n)
            .map(|s| {
                mdp.defined_actions(s)
                    .map(|a| Choice {
                        id: ChoiceId::Action(a),
                        reward: task.reward(s, a) / task.alpha * alpha,
                        next: mdp.row(s, a).iter().map(|&(t, p)| (t, gamma * p)).collect(),
                    })
                    .collect()
            })
            .collect();
        ChoiceModel {
            choices,
            pinned: (0..n).map(|s| task.is_absorbing(s)).collect(),
        }
    }

    /// Pins every state in `mask` in addition to the current pinned set.
    pub fn pin(&mut self, mask: &[bool]) {
        for (p, &m) in self.pinned.iter_mut().zip(mask) {
            *p |= m;
        }
    }

    /// One-step lookahead `r + sum w V(t)` for every choice of `s`.
    pub fn q_row(&self, s: usize, v: &[f64]) -> Vec<f64> {
        self.choices[s]
            .iter()
            .map(|c| c.reward + c.next.iter().map(|&(t, w)| w * v[t]).sum::<f64>())
            .collect()
    }
}
