//! Primitive options and their composition by generalized
//! conjunction/disjunction (GCD).

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{bind_task, LabeledMdp, SspTask, StateSet};
use crate::solver::{
    cross_q, log_sum_exp, policy_csv, policy_eval, softmax_vi, values_csv, write_text, ChoiceId,
    ChoiceModel, Policy, ViConfig,
};
use crate::taskdecomp::{CompositionOp, CondReachTask, Prop};

/// Default andness for disjunction.
pub const DEFAULT_ETA_OR: f64 = 50.0;
/// Default andness for conjunction.
pub const DEFAULT_ETA_AND: f64 = -50.0;
const EXCLUSION_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    Primitive,
    Composition {
        op: CompositionOp,
        operands: Vec<String>,
        eta: f64,
    },
}

/// Option `<I, pi, beta>` over the actions of one MDP.
///
/// The initiation set is every state; `termination` is where `beta = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct OptionPolicy {
    pub name: String,
    pub task: CondReachTask,
    pub provenance: Provenance,
    pub policy: Policy,
    pub termination: StateSet,
    /// Softmax value of the option's own task for primitives; entropy-free
    /// value of the flattened policy for compositions.
    pub values: Vec<f64>,
    /// Value iteration sweeps, 0 for compositions.
    pub iterations: usize,
}

impl OptionPolicy {
    /// `pi(a | s)`.
    pub fn action_prob(&self, s: usize, a: usize) -> f64 {
        self.policy.prob(s, ChoiceId::Action(a))
    }

    pub fn terminates(&self, s: usize) -> bool {
        self.termination.contains(s)
    }
}

/// Name used for an option of `task`, e.g. `O(s1, C)`.
pub fn option_name(task: &CondReachTask, mdp: &LabeledMdp) -> String {
    let ap = mdp.ap();
    format!("O({}, {})", task.goal.display(ap), task.unsafe_.display(ap))
}

/// Option for a primitive task: softmax value iteration on the bound SSP.
pub fn make_primitive_option(
    task: &CondReachTask,
    mdp: &LabeledMdp,
    gamma: f64,
    alpha: f64,
    tau: f64,
    cfg: &ViConfig,
) -> Result<OptionPolicy> {
    if !task.is_primitive() {
        return Err(Error::Composition(format!(
            "`{}` does not have an atomic goal",
            task.describe(mdp.ap())
        )));
    }
    let ssp = bind_task(mdp, task, gamma, alpha, tau)?;
    let model = ChoiceModel::from_ssp(&ssp);
    let (vf, policy) = softmax_vi(&model, tau, cfg)?;
    Ok(OptionPolicy {
        name: option_name(task, mdp),
        task: task.clone(),
        provenance: Provenance::Primitive,
        policy,
        termination: ssp.absorbing(),
        values: vf.values,
        iterations: vf.iterations,
    })
}

/// `(1/eta) log sum_i W_i exp(eta x_i)`; unit weights when `weights` is `None`.
pub fn gcd_value(xs: &[f64], eta: f64, weights: Option<&[f64]>) -> Result<f64> {
    if xs.is_empty() {
        return Err(Error::InvalidParameter("GCD of an empty list".into()));
    }
    if eta == 0.0 || !eta.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "andness {eta} must be finite and non-zero"
        )));
    }
    let terms: Vec<f64> = match weights {
        None => xs.iter().map(|x| eta * x).collect(),
        Some(w) if w.len() == xs.len() && w.iter().all(|&w| w > 0.0) => {
            xs.iter().zip(w).map(|(x, w)| eta * x + w.ln()).collect()
        }
        Some(_) => {
            return Err(Error::InvalidParameter(
                "weights must be positive and match the inputs".into(),
            ))
        }
    };
    Ok(log_sum_exp(&terms) / eta)
}

/// Q-table of `phi1 \ phi2` from those of `phi1` and `phi1 & phi2`:
/// `(1/|eta|) log(exp(|eta| q1) - exp(|eta| q12))`, clamped to 0 where the
/// difference is below `1e-12` or the result would be negative.
pub fn exclusion_q(q1: &[f64], q12: &[f64], eta: f64) -> Vec<f64> {
    let k = eta.abs();
    q1.iter()
        .zip(q12)
        .map(|(&a, &b)| {
            let (a, b) = (k * a, k * b);
            if a <= b {
                return 0.0;
            }
            // log(exp(a) - exp(b)) = a + log(1 - exp(b - a))
            let log_diff = a + (-(b - a).exp()).ln_1p();
            if log_diff <= EXCLUSION_EPS.ln() {
                return 0.0;
            }
            (log_diff / k).max(0.0)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompositionSpec {
    pub op: CompositionOp,
    /// Indices into the option list.
    pub operands: Vec<usize>,
    pub eta: f64,
    #[serde(default)]
    pub weights: Option<Vec<f64>>,
}

impl CompositionSpec {
    pub fn new(op: CompositionOp, operands: Vec<usize>, eta: f64) -> Self {
        CompositionSpec {
            op,
            operands,
            eta,
            weights: None,
        }
    }

    fn validate(&self, n_options: usize) -> Result<()> {
        if self.operands.is_empty() {
            return Err(Error::Composition("no operands".into()));
        }
        if let Some(&j) = self.operands.iter().find(|&&j| j >= n_options) {
            return Err(Error::Composition(format!("unknown option {j}")));
        }
        if self.eta == 0.0 || !self.eta.is_finite() {
            return Err(Error::Composition(format!(
                "andness {} must be finite and non-zero",
                self.eta
            )));
        }
        match self.op {
            CompositionOp::Or if self.eta < 0.0 => Err(Error::Composition(
                "disjunction needs a positive andness".into(),
            )),
            CompositionOp::And if self.eta > 0.0 => Err(Error::Composition(
                "conjunction needs a negative andness".into(),
            )),
            CompositionOp::Minus if self.operands.len() != 2 => Err(Error::Composition(
                "exclusion takes exactly two operands".into(),
            )),
            _ => Ok(()),
        }
    }
}

/// Parameters of the SSP tasks used to evaluate operands against each other.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComposeContext<'a> {
    pub mdp: &'a LabeledMdp,
    pub gamma: f64,
    pub alpha: f64,
    pub tau: f64,
}

/// Cross-evaluation tables `tables[i][j][s] = Q_i(s, o_j)`.
pub fn cross_q_tables(tasks: &[SspTask], options: &[&OptionPolicy]) -> Result<Vec<Vec<Vec<f64>>>> {
    tasks
        .iter()
        .map(|t| options.iter().map(|o| cross_q(t, o)).collect())
        .collect()
}

/// Per-state distribution over operand options, a softmax at temperature
/// `1/|eta|` of each option's GCD value `lambda_j = gcd(Q_.(s, o_j) / alpha)`:
/// `pi_o(s)[j] ∝ exp(|eta| lambda_j) = (sum_i W_i exp(eta Q_i(s, o_j) / alpha))^sign(eta)`.
/// For `eta > 0` this is the plain sum of exponentials; for `eta < 0` it
/// favours the option with the highest soft minimum.
pub fn option_weights(
    tables: &[Vec<Vec<f64>>],
    eta: f64,
    alpha: f64,
    weights: Option<&[f64]>,
) -> Vec<Vec<f64>> {
    let n_tasks = tables.len();
    let n_opts = tables[0].len();
    let n = tables[0][0].len();
    (0..n)
        .map(|s| {
            let scores: Vec<f64> = (0..n_opts)
                .map(|j| {
                    let terms: Vec<f64> = (0..n_tasks)
                        .map(|i| {
                            let w = weights.map_or(0.0, |w| w[i].ln());
                            eta * tables[i][j][s] / alpha + w
                        })
                        .collect();
                    eta.signum() * log_sum_exp(&terms)
                })
                .collect();
            let z = log_sum_exp(&scores);
            scores.iter().map(|x| (x - z).exp()).collect()
        })
        .collect()
}

/// Mixture `pi(a|s) = sum_j w[s][j] pi_j(a|s)`.
fn flatten(options: &[&OptionPolicy], weights: &[Vec<f64>]) -> Policy {
    let rows = weights
        .iter()
        .enumerate()
        .map(|(s, w)| {
            let mut row: Vec<(ChoiceId, f64)> = Vec::new();
            for (o, &wj) in options.iter().zip(w) {
                for &(id, p) in &o.policy.rows[s] {
                    match row.iter_mut().find(|e| e.0 == id) {
                        Some(e) => e.1 += wj * p,
                        None => row.push((id, wj * p)),
                    }
                }
            }
            row.sort_by_key(|e| e.0);
            row
        })
        .collect();
    Policy { rows }
}

/// Composes primitive options into an option for the disjunction,
/// conjunction or exclusion of their goals.
pub fn compose(
    spec: &CompositionSpec,
    options: &[OptionPolicy],
    ctx: ComposeContext,
) -> Result<OptionPolicy> {
    spec.validate(options.len())?;
    let ops: Vec<&OptionPolicy> = spec.operands.iter().map(|&j| &options[j]).collect();
    let unsafe_ = ops[0].task.unsafe_.clone();
    if ops.iter().any(|o| o.task.unsafe_ != unsafe_) {
        return Err(Error::Composition(
            "operands have different unsafe sets".into(),
        ));
    }
    let atoms: Vec<usize> =
        ops.iter()
            .map(|o| {
                o.task.goal.atom().ok_or_else(|| {
                    Error::Composition(format!("operand `{}` is not primitive", o.name))
                })
            })
            .collect::<Result<_>>()?;
    let bind = |goal: Prop| {
        bind_task(
            ctx.mdp,
            &CondReachTask::new(goal, unsafe_.clone()),
            ctx.gamma,
            ctx.alpha,
            ctx.tau,
        )
    };
    let operand_tasks: Vec<SspTask> = atoms
        .iter()
        .map(|&p| bind(Prop::Atom(p)))
        .collect::<Result<_>>()?;
    let weights = spec.weights.as_deref();

    let (goal, pi_o) = match spec.op {
        CompositionOp::Or | CompositionOp::And => {
            let tables = cross_q_tables(&operand_tasks, &ops)?;
            let goal = if spec.op == CompositionOp::Or {
                Prop::Or(atoms.clone())
            } else {
                Prop::And(atoms.clone())
            };
            (goal, option_weights(&tables, spec.eta, ctx.alpha, weights))
        }
        CompositionOp::Minus => {
            let joint = bind(Prop::And(atoms.clone()))?;
            let q1 = cross_q_tables(&operand_tasks[..1], &ops)?.remove(0);
            let q12 = cross_q_tables(std::slice::from_ref(&joint), &ops)?.remove(0);
            let scale = |t: &[f64]| t.iter().map(|x| x / ctx.alpha).collect::<Vec<_>>();
            let qm: Vec<Vec<f64>> = q1
                .iter()
                .zip(&q12)
                .map(|(a, b)| {
                    exclusion_q(&scale(a), &scale(b), spec.eta)
                        .into_iter()
                        .map(|x| x * ctx.alpha)
                        .collect()
                })
                .collect();
            let goal = Prop::Minus(atoms[0], vec![atoms[1]]);
            (goal, option_weights(&[qm], spec.eta.abs(), ctx.alpha, None))
        }
    };
    let task = CondReachTask::new(goal, unsafe_.clone());
    let own = bind_task(ctx.mdp, &task, ctx.gamma, ctx.alpha, ctx.tau)?;
    let termination = match spec.op {
        CompositionOp::Or | CompositionOp::And => own.absorbing(),
        CompositionOp::Minus => operand_tasks[0].absorbing(),
    };
    if spec.op == CompositionOp::And && own.goal.is_empty() {
        eprintln!(
            "warning: conjunction `{}` has an empty goal set",
            task.describe(ctx.mdp.ap())
        );
    }
    let policy = flatten(&ops, &pi_o);
    let mut model = ChoiceModel::from_ssp(&own);
    model.pin(termination.mask());
    let values = policy_eval(&model, &policy)?;
    Ok(OptionPolicy {
        name: option_name(&task, ctx.mdp),
        task,
        provenance: Provenance::Composition {
            op: spec.op,
            operands: ops.iter().map(|o| o.name.clone()).collect(),
            eta: spec.eta,
        },
        policy,
        termination,
        values,
        iterations: 0,
    })
}

/// Serialized option: metadata in JSON, policy and values as CSV files next
/// to it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptionFile {
    pub name: String,
    pub task: CondReachTask,
    pub provenance: Provenance,
    /// States with `beta = 1`.
    pub termination: Vec<usize>,
    pub states: usize,
    pub iterations: usize,
    pub policy_csv: String,
    pub values_csv: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptionIndex {
    pub options: Vec<OptionFile>,
}

/// Writes `options.json` plus `o<k>_policy.csv` / `o<k>_values.csv`
/// (1-based `k`) into `dir`.
pub fn save_options(dir: &Path, options: &[OptionPolicy]) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut index = OptionIndex {
        options: Vec::new(),
    };
    for (k, o) in options.iter().enumerate() {
        let policy_file = format!("o{}_policy.csv", k + 1);
        let values_file = format!("o{}_values.csv", k + 1);
        write_text(&dir.join(&policy_file), &policy_csv(&o.policy))?;
        write_text(&dir.join(&values_file), &values_csv(&o.values))?;
        index.options.push(OptionFile {
            name: o.name.clone(),
            task: o.task.clone(),
            provenance: o.provenance.clone(),
            termination: o.termination.iter().collect(),
            states: o.values.len(),
            iterations: o.iterations,
            policy_csv: policy_file,
            values_csv: values_file,
        });
    }
    let path = dir.join("options.json");
    let text = serde_json::to_string_pretty(&index).map_err(|e| Error::json(&path, e))?;
    write_text(&path, &text)
}

pub fn load_options(dir: &Path) -> Result<Vec<OptionPolicy>> {
    let path = dir.join("options.json");
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let index: OptionIndex = serde_json::from_str(&text).map_err(|e| Error::json(&path, e))?;
    index
        .options
        .into_iter()
        .map(|f| {
            let n = f.states;
            let mut termination = StateSet::empty(n);
            for s in f.termination {
                if s >= n {
                    return Err(Error::InvalidModel(format!(
                        "{}: termination state {s} out of range",
                        f.name
                    )));
                }
                termination.insert(s);
            }
            let policy_path = dir.join(&f.policy_csv);
            let mut rows = vec![Vec::new(); n];
            for rec in read_csv(&policy_path, 3)? {
                let s = parse_field::<usize>(&policy_path, &rec[0])?;
                let a = parse_field::<usize>(&policy_path, &rec[1])?;
                let p = parse_field::<f64>(&policy_path, &rec[2])?;
                if s >= n {
                    return Err(Error::InvalidModel(format!(
                        "{}: state {s} out of range",
                        policy_path.display()
                    )));
                }
                rows[s].push((ChoiceId::Action(a), p));
            }
            let values_path = dir.join(&f.values_csv);
            let mut values = vec![0.0; n];
            for rec in read_csv(&values_path, 2)? {
                let s = parse_field::<usize>(&values_path, &rec[0])?;
                if s >= n {
                    return Err(Error::InvalidModel(format!(
                        "{}: state {s} out of range",
                        values_path.display()
                    )));
                }
                values[s] = parse_field::<f64>(&values_path, &rec[1])?;
            }
            Ok(OptionPolicy {
                name: f.name,
                task: f.task,
                provenance: f.provenance,
                policy: Policy { rows },
                termination,
                values,
                iterations: f.iterations,
            })
        })
        .collect()
}

fn read_csv(path: &Path, fields: usize) -> Result<Vec<Vec<String>>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .skip(1)
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let rec: Vec<String> = l.split(',').map(|f| f.trim().to_string()).collect();
            if rec.len() == fields {
                Ok(rec)
            } else {
                Err(Error::InvalidModel(format!(
                    "{}: malformed line `{l}`",
                    path.display()
                )))
            }
        })
        .collect()
}

fn parse_field<T: std::str::FromStr>(path: &Path, field: &str) -> Result<T> {
    field
        .parse()
        .map_err(|_| Error::InvalidModel(format!("{}: bad field `{field}`", path.display())))
}
