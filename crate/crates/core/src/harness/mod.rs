//! End-to-end reproduction of the grid-world experiments: option synthesis,
//! the composition study, the four-planner comparison and the policy
//! deviation table.

mod config;
mod report;

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{bind_task, build_gridworld, GridWorldSpec, LabeledMdp, SspTask};
use crate::options::{
    compose, make_primitive_option, ComposeContext, CompositionSpec, OptionPolicy,
};
use crate::product::{
    build_product, PlanResult, PlannerConfig, PlannerKind, ProductModel, ProductPlanner,
};
use crate::scltl::{parse, to_dfa, Dfa, Formula};
use crate::solver::{hardmax_vi, policy_eval, softmax_vi, ChoiceModel, Policy, ViConfig};
use crate::taskdecomp::{
    decompose, prune_to_primitives, rank_states_over, CompositionOp, CondReachTask, PrimitiveSet,
    Prop,
};

pub use config::{ExperimentConfig, TaskSpec, BUNDLED_GRID};
pub use report::{
    run_all, write_outputs, Gate, RunReport, Table1Row, Table2Row, TaskSummary, Timings,
};

/// One task after translation and decomposition.
#[derive(Debug, Clone)]
pub struct TaskSetup {
    pub name: String,
    pub formula: Formula,
    pub dfa: Dfa,
    pub decomposition: PrimitiveSet,
    /// Indices into [`Experiment::options`] offered to the planners.
    pub option_ids: Vec<usize>,
}

/// Grid, tasks and the synthesized option library.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub grid: GridWorldSpec,
    pub mdp: LabeledMdp,
    pub tasks: Vec<TaskSetup>,
    /// Primitive options (one per atomic task, in atom order) followed by
    /// the compositions the tasks need.
    pub options: Vec<OptionPolicy>,
    pub num_primitive: usize,
}

impl Experiment {
    pub fn new(config: ExperimentConfig) -> Result<Self> {
        let grid = config.grid_spec()?;
        let mdp = build_gridworld(&grid)?;
        let ap = mdp.ap().clone();
        let admissible = mdp.label_symbols();
        let vi = ViConfig {
            tol: config.tol,
            max_iter: config.max_iter,
            monitor: Vec::new(),
        };

        let mut tasks = Vec::new();
        for t in &config.tasks {
            let mut formula = parse(&t.formula, &ap)?;
            if config.guard_eventualities {
                formula = formula.guard_eventualities();
            }
            let dfa = to_dfa(&formula, &ap)?;
            let ranked = rank_states_over(&dfa, &admissible)?;
            let decomposition = prune_to_primitives(&decompose(&ranked))?;
            tasks.push(TaskSetup {
                name: t.name.clone(),
                formula,
                dfa,
                decomposition,
                option_ids: Vec::new(),
            });
        }

        let mut atomic: Vec<CondReachTask> = Vec::new();
        for t in &tasks {
            for a in t.decomposition.atomic_tasks() {
                if !atomic
                    .iter()
                    .any(|x| x.goal == a.goal && x.unsafe_ == a.unsafe_)
                {
                    atomic.push(CondReachTask::new(a.goal.clone(), a.unsafe_.clone()));
                }
            }
        }
        atomic.sort_by(|a, b| (&a.goal, &a.unsafe_).cmp(&(&b.goal, &b.unsafe_)));
        let mut options = Vec::new();
        for a in &atomic {
            options.push(make_primitive_option(
                a,
                &mdp,
                config.gamma,
                config.alpha,
                config.tau,
                &vi,
            )?);
        }
        let num_primitive = options.len();

        let ctx = ComposeContext {
            mdp: &mdp,
            gamma: config.gamma,
            alpha: config.alpha,
            tau: config.tau,
        };
        for t in &mut tasks {
            t.option_ids = (0..num_primitive).collect();
            for c in &t.decomposition.composites {
                let existing = options[num_primitive..]
                    .iter()
                    .position(|o| o.task.goal == c.task.goal && o.task.unsafe_ == c.task.unsafe_);
                let id = match existing {
                    Some(k) => num_primitive + k,
                    None => {
                        let operands = c
                            .operands
                            .iter()
                            .map(|&p| {
                                options[..num_primitive]
                                    .iter()
                                    .position(|o| {
                                        o.task.goal == Prop::Atom(p)
                                            && o.task.unsafe_ == c.task.unsafe_
                                    })
                                    .ok_or_else(|| {
                                        Error::Composition(format!(
                                            "no primitive option for atom {p}"
                                        ))
                                    })
                            })
                            .collect::<Result<Vec<_>>>()?;
                        let eta = match c.op {
                            CompositionOp::And => config.eta_and,
                            CompositionOp::Or | CompositionOp::Minus => config.eta_or,
                        };
                        let spec = CompositionSpec::new(c.op, operands, eta);
                        let composed = compose(&spec, &options[..num_primitive], ctx)?;
                        options.push(composed);
                        options.len() - 1
                    }
                };
                if !t.option_ids.contains(&id) {
                    t.option_ids.push(id);
                }
            }
        }
        Ok(Experiment {
            config,
            grid,
            mdp,
            tasks,
            options,
            num_primitive,
        })
    }

    pub fn task_options(&self, task: usize) -> Vec<OptionPolicy> {
        self.tasks[task]
            .option_ids
            .iter()
            .map(|&i| self.options[i].clone())
            .collect()
    }

    fn atom(&self, name: &str) -> Result<usize> {
        self.mdp
            .ap()
            .index_of(name)
            .ok_or_else(|| Error::UnknownAtom(name.to_string()))
    }

    fn unsafe_prop(&self) -> Result<Prop> {
        Ok(Prop::Atom(self.atom("C")?))
    }

    /// Primitive option for `atom`, taken from the library when present.
    pub fn primitive_option(&self, atom: usize) -> Result<OptionPolicy> {
        let unsafe_ = self.unsafe_prop()?;
        if let Some(o) = self.options[..self.num_primitive]
            .iter()
            .find(|o| o.task.goal == Prop::Atom(atom) && o.task.unsafe_ == unsafe_)
        {
            return Ok(o.clone());
        }
        let c = &self.config;
        make_primitive_option(
            &CondReachTask::new(Prop::Atom(atom), unsafe_),
            &self.mdp,
            c.gamma,
            c.alpha,
            c.tau,
            &self.vi_config(),
        )
    }

    pub fn vi_config(&self) -> ViConfig {
        ViConfig {
            tol: self.config.tol,
            max_iter: self.config.max_iter,
            monitor: Vec::new(),
        }
    }

    fn bind(&self, goal: Prop) -> Result<SspTask> {
        let c = &self.config;
        bind_task(
            &self.mdp,
            &CondReachTask::new(goal, self.unsafe_prop()?),
            c.gamma,
            c.alpha,
            c.tau,
        )
    }
}

/// Relative error `|a - b| / |b|` in the 2-norm and the sup-norm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelativeError {
    pub e2: f64,
    pub einf: f64,
}

impl RelativeError {
    pub fn between(a: &[f64], b: &[f64]) -> Self {
        let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
        let n2 = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let ninf = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let ratio = |num: f64, den: f64| {
            if den == 0.0 {
                if num == 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                }
            } else {
                num / den
            }
        };
        RelativeError {
            e2: ratio(n2(&d), n2(b)),
            einf: ratio(ninf(&d), ninf(b)),
        }
    }
}

/// Values of the direct and the composed policy for one operator.
#[derive(Debug, Clone, PartialEq)]
pub struct CompositionCase {
    pub op: CompositionOp,
    pub eta: f64,
    /// Entropy-free value of the directly synthesized softmax policy.
    pub direct: Vec<f64>,
    /// Entropy-free value of the hardmax-optimal policy.
    pub optimal: Vec<f64>,
    pub composed: Vec<f64>,
    pub error: RelativeError,
    pub error_vs_optimal: RelativeError,
    pub goal: Vec<bool>,
    pub unsafe_: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompositionStudy {
    pub or: CompositionCase,
    pub and: CompositionCase,
}

/// Composes the two operand options by OR and AND and compares each result
/// with a policy synthesized directly for the composite task.
pub fn run_composition_study(exp: &Experiment) -> Result<CompositionStudy> {
    let c = &exp.config;
    let [a, b] = &c.composition_operands;
    let (pa, pb) = (exp.atom(a)?, exp.atom(b)?);
    let operands = vec![exp.primitive_option(pa)?, exp.primitive_option(pb)?];
    let ctx = ComposeContext {
        mdp: &exp.mdp,
        gamma: c.gamma,
        alpha: c.alpha,
        tau: c.tau,
    };
    let case = |op: CompositionOp, eta: f64, goal: Prop| -> Result<CompositionCase> {
        let ssp = exp.bind(goal)?;
        let model = ChoiceModel::from_ssp(&ssp);
        let (_, direct_pi) = softmax_vi(&model, c.tau, &exp.vi_config())?;
        let direct = policy_eval(&model, &direct_pi)?;
        let (_, opt_pi) = hardmax_vi(&model, &exp.vi_config())?;
        let optimal = policy_eval(&model, &opt_pi)?;
        let composed_opt = compose(&CompositionSpec::new(op, vec![0, 1], eta), &operands, ctx)?;
        let composed = policy_eval(&model, &composed_opt.policy)?;
        Ok(CompositionCase {
            op,
            eta,
            error: RelativeError::between(&direct, &composed),
            error_vs_optimal: RelativeError::between(&optimal, &composed),
            direct,
            optimal,
            composed,
            goal: ssp.goal.mask().to_vec(),
            unsafe_: ssp.unsafe_.mask().to_vec(),
        })
    };
    Ok(CompositionStudy {
        or: case(CompositionOp::Or, c.eta_or, Prop::Or(vec![pa, pb]))?,
        and: case(CompositionOp::And, c.eta_and, Prop::And(vec![pa, pb]))?,
    })
}

/// The four planners on one task.
#[derive(Debug, Clone)]
pub struct TaskPlans {
    pub task: String,
    pub product: ProductModel,
    pub options: Vec<OptionPolicy>,
    pub plans: Vec<PlanResult>,
    pub seconds: Vec<f64>,
}

impl TaskPlans {
    pub fn get(&self, kind: PlannerKind) -> &PlanResult {
        self.plans.iter().find(|p| p.kind == kind).unwrap()
    }

    pub fn planner(&self, c: &ExperimentConfig) -> Result<ProductPlanner<'_>> {
        ProductPlanner::new(&self.product, &self.options, c.gamma, c.alpha, c.tau)
    }
}

pub fn run_planner_comparison(exp: &Experiment) -> Result<Vec<TaskPlans>> {
    let c = &exp.config;
    exp.tasks
        .iter()
        .enumerate()
        .map(|(k, t)| {
            let product = build_product(&exp.mdp, &t.dfa)?;
            let options = exp.task_options(k);
            let mut out = TaskPlans {
                task: t.name.clone(),
                product,
                options,
                plans: Vec::new(),
                seconds: Vec::new(),
            };
            let planner = out.planner(c)?;
            let mut plans = Vec::new();
            let mut seconds = Vec::new();
            for kind in PlannerKind::ALL {
                let start = Instant::now();
                let plan = planner.plan(&PlannerConfig {
                    kind,
                    tol: c.tol,
                    max_iter: c.max_iter,
                })?;
                seconds.push(start.elapsed().as_secs_f64());
                plans.push(plan);
            }
            drop(planner);
            out.plans = plans;
            out.seconds = seconds;
            Ok(out)
        })
        .collect()
}

/// Entropy-free value deviations of the option and mixed policies from the
/// action policy.
#[derive(Debug, Clone, PartialEq)]
pub struct Deviation {
    pub task: String,
    pub option_vs_action: RelativeError,
    pub mixed_vs_action: RelativeError,
}

pub fn run_policy_deviation(exp: &Experiment, plans: &[TaskPlans]) -> Result<Vec<Deviation>> {
    plans
        .iter()
        .map(|tp| {
            let planner = tp.planner(&exp.config)?;
            let eval = |k: PlannerKind| planner.evaluate(&tp.get(k).policy);
            let action = eval(PlannerKind::Action)?;
            let option = eval(PlannerKind::Option)?;
            let mixed = eval(PlannerKind::Mixed)?;
            Ok(Deviation {
                task: tp.task.clone(),
                option_vs_action: RelativeError::between(&option, &action),
                mixed_vs_action: RelativeError::between(&mixed, &action),
            })
        })
        .collect()
}

/// Entropy-free evaluation of an arbitrary action policy on an SSP task.
pub fn evaluate_on(task: &SspTask, policy: &Policy) -> Result<Vec<f64>> {
    policy_eval(&ChoiceModel::from_ssp(task), policy)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_default() {
        let c: ExperimentConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(c, ExperimentConfig::default());
    }

    #[test]
    fn identical_values_have_zero_error() {
        let v = [1.0, 2.0, 3.0];
        assert_eq!(
            RelativeError::between(&v, &v),
            RelativeError { e2: 0.0, einf: 0.0 }
        );
        let e = RelativeError::between(&[2.0, 0.0], &[1.0, 0.0]);
        assert_eq!((e.e2, e.einf), (1.0, 1.0));
    }

    #[test]
    fn bundled_experiment_options() {
        let exp = Experiment::new(ExperimentConfig::default()).unwrap();
        assert_eq!(exp.num_primitive, 3);
        for o in &exp.options[..exp.num_primitive] {
            assert!(
                (15..=60).contains(&o.iterations),
                "{} took {}",
                o.name,
                o.iterations
            );
        }
        let names: Vec<&str> = exp.options.iter().map(|o| o.name.as_str()).collect();
        assert_eq!(names, ["O(s1, C)", "O(s2, C)", "O(s3, C)", "O(s2 & s3, C)"]);
    }
}
