use super::{LabeledMdp, StateSet};
use crate::error::{Error, Result};
use crate::taskdecomp::CondReachTask;

/// Conditional-reachability task bound to an MDP.
///
/// `mdp` is the revised model where goal and unsafe states self-loop under
/// every defined action.
#[derive(Debug, Clone, PartialEq)]
pub struct SspTask {
    pub mdp: LabeledMdp,
    pub task: CondReachTask,
    pub goal: StateSet,
    pub unsafe_: StateSet,
    pub gamma: f64,
    pub alpha: f64,
    pub tau: f64,
}

impl SspTask {
    pub fn is_absorbing(&self, s: usize) -> bool {
        self.goal.contains(s) || self.unsafe_.contains(s)
    }

    pub fn absorbing(&self) -> StateSet {
        self.goal.union(&self.unsafe_)
    }

    /// `alpha * P(goal | s, a)` outside the absorbing set, 0 inside.
    pub fn reward(&self, s: usize, a: usize) -> f64 {
        if self.is_absorbing(s) {
            return 0.0;
        }
        self.alpha
            * self
                .mdp
                .row(s, a)
                .iter()
                .filter(|(t, _)| self.goal.contains(*t))
                .map(|(_, p)| p)
                .sum::<f64>()
    }
}

pub(crate) fn check_params(gamma: f64, alpha: f64, tau: f64) -> Result<()> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "discount {gamma} outside (0, 1]"
        )));
    }
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "reward scale {alpha} must be positive"
        )));
    }
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "temperature {tau} must be positive"
        )));
    }
    Ok(())
}

/// Binds `task` to `mdp`: computes `[[goal]]` and `[[unsafe]]` and makes
/// both absorbing. An empty goal set is allowed; every value is then 0.
pub fn bind_task(
    mdp: &LabeledMdp,
    task: &CondReachTask,
    gamma: f64,
    alpha: f64,
    tau: f64,
) -> Result<SspTask> {
    check_params(gamma, alpha, tau)?;
    if task.goal.max_atom().is_some_and(|p| p >= mdp.ap().len())
        || task.unsafe_.max_atom().is_some_and(|p| p >= mdp.ap().len())
    {
        return Err(Error::AlphabetMismatch(
            "task refers to atoms outside the MDP alphabet".into(),
        ));
    }
    let goal = mdp.states_satisfying(&task.goal);
    let unsafe_ = mdp.states_satisfying(&task.unsafe_);
    let overlap = goal.intersection(&unsafe_);
    if let Some(example) = overlap.iter().next() {
        return Err(Error::OverlappingGoal {
            count: overlap.count(),
            example,
        });
    }
    let mut bound = mdp.clone();
    for s in goal.union(&unsafe_).iter() {
        for a in 0..bound.num_actions() {
            if bound.is_defined(s, a) {
                bound.trans[s][a] = vec![(s, 1.0)];
            }
        }
    }
    Ok(SspTask {
        mdp: bound,
        task: task.clone(),
        goal,
        unsafe_,
        gamma,
        alpha,
        tau,
    })
}
