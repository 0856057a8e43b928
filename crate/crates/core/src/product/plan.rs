use serde::{Deserialize, Serialize};

use super::macro_model::{build_macro_model, MacroModel};
use super::ProductModel;
use crate::error::{Error, Result};
use crate::mdp::LabeledMdp;
use crate::options::OptionPolicy;
use crate::solver::{
    extract_policy, max_reach, policy_eval, value_iteration, ChoiceModel, Operator, Policy,
    TracePoint, ValueFunction, ViConfig, DEFAULT_MAX_ITER, DEFAULT_TOL,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlannerKind {
    /// Hardmax over actions, maximizing the satisfaction probability.
    Optimal,
    /// Softmax over actions.
    Action,
    /// Softmax over options.
    Option,
    /// Softmax over actions and options.
    Mixed,
}

impl PlannerKind {
    pub const ALL: [PlannerKind; 4] = [
        PlannerKind::Optimal,
        PlannerKind::Action,
        PlannerKind::Option,
        PlannerKind::Mixed,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PlannerKind::Optimal => "optimal",
            PlannerKind::Action => "action",
            PlannerKind::Option => "option",
            PlannerKind::Mixed => "mixed",
        }
    }

    pub fn uses_actions(self) -> bool {
        self != PlannerKind::Option
    }

    pub fn uses_options(self) -> bool {
        matches!(self, PlannerKind::Option | PlannerKind::Mixed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlannerConfig {
    pub kind: PlannerKind,
    pub tol: f64,
    pub max_iter: usize,
}

impl PlannerConfig {
    pub fn new(kind: PlannerKind) -> Self {
        PlannerConfig {
            kind,
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanResult {
    pub kind: PlannerKind,
    /// Value iteration result; reach probabilities for the optimal planner,
    /// discounted regularized values otherwise.
    pub values: ValueFunction,
    pub policy: Policy,
    /// Undiscounted probability of reaching acceptance under `policy`, per
    /// product state.
    pub reach: Vec<f64>,
    /// `reach` averaged over the initial distribution.
    pub probability: f64,
}

impl PlanResult {
    pub fn iterations(&self) -> usize {
        self.values.iterations
    }

    pub fn trace(&self) -> &[TracePoint] {
        &self.values.trace
    }
}

/// Planning context: a product, an option set and the discount, reward
/// scale and temperature used by every planner.
///
/// Two option models are kept: one with the configured discount and reward
/// scale for planning, one undiscounted with unit reward for satisfaction
/// probabilities.
#[derive(Debug, Clone)]
pub struct ProductPlanner<'a> {
    product: &'a ProductModel,
    options: &'a [OptionPolicy],
    gamma: f64,
    alpha: f64,
    tau: f64,
    planning: MacroModel,
    satisfaction: MacroModel,
}

impl<'a> ProductPlanner<'a> {
    pub fn new(
        product: &'a ProductModel,
        options: &'a [OptionPolicy],
        gamma: f64,
        alpha: f64,
        tau: f64,
    ) -> Result<Self> {
        crate::mdp::check_params(gamma, alpha, tau)?;
        Ok(ProductPlanner {
            product,
            options,
            gamma,
            alpha,
            tau,
            planning: build_macro_model(product, options, gamma, alpha)?,
            satisfaction: build_macro_model(product, options, 1.0, 1.0)?,
        })
    }

    pub fn product(&self) -> &ProductModel {
        self.product
    }

    pub fn mdp(&self) -> &LabeledMdp {
        self.product.mdp()
    }

    pub fn options(&self) -> &[OptionPolicy] {
        self.options
    }

    pub fn planning_macro(&self) -> &MacroModel {
        &self.planning
    }

    pub fn satisfaction_macro(&self) -> &MacroModel {
        &self.satisfaction
    }

    /// Choice model over the requested action sets, either with the planning
    /// discount and reward scale or undiscounted with unit reward.
    pub fn model(&self, actions: bool, options: bool, undiscounted: bool) -> ChoiceModel {
        let (gamma, alpha, mac) = if undiscounted {
            (1.0, 1.0, &self.satisfaction)
        } else {
            (self.gamma, self.alpha, &self.planning)
        };
        let mut model = self.product.micro_model(gamma, alpha);
        if !actions {
            for cs in &mut model.choices {
                cs.clear();
            }
        }
        if options {
            mac.add_to(&mut model);
        }
        model
    }

    pub fn plan(&self, cfg: &PlannerConfig) -> Result<PlanResult> {
        let vi = ViConfig {
            tol: cfg.tol,
            max_iter: cfg.max_iter,
            monitor: self.product.monitor(),
        };
        let kind = cfg.kind;
        if kind.uses_options() && self.options.is_empty() {
            return Err(Error::InvalidParameter(format!(
                "the {} planner needs at least one option",
                kind.name()
            )));
        }
        let (values, policy, reach) = if kind == PlannerKind::Optimal {
            let model = self.model(true, false, true);
            max_reach(&model, &vi)?
        } else {
            let model = self.model(kind.uses_actions(), kind.uses_options(), false);
            let op = Operator::Softmax { tau: self.tau };
            let values = value_iteration(&model, op, &vi)?;
            let policy = extract_policy(&model, &values.values, op);
            let reach = self.satisfaction(&policy)?;
            (values, policy, reach)
        };
        Ok(PlanResult {
            kind,
            probability: self.product.initial_value(&reach),
            values,
            policy,
            reach,
        })
    }

    /// Value iteration with an explicit operator over the chosen action sets.
    pub fn solve(
        &self,
        actions: bool,
        options: bool,
        op: Operator,
        vi: &ViConfig,
    ) -> Result<(ValueFunction, Policy)> {
        let model = self.model(actions, options, false);
        let values = value_iteration(&model, op, vi)?;
        let policy = extract_policy(&model, &values.values, op);
        Ok((values, policy))
    }

    /// Undiscounted reach probability of acceptance under `policy`.
    pub fn satisfaction(&self, policy: &Policy) -> Result<Vec<f64>> {
        policy_eval(&self.model(true, true, true), policy)
    }

    /// Expected discounted reward of `policy` without entropy terms.
    pub fn evaluate(&self, policy: &Policy) -> Result<Vec<f64>> {
        policy_eval(&self.model(true, true, false), policy)
    }
}
