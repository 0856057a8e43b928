use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use compplan::harness::{run_all, ExperimentConfig};
use compplan::mdp::{bind_task, build_gridworld, GridWorldSpec, LabeledMdp};
use compplan::options::{
    compose, load_options, make_primitive_option, save_options, ComposeContext, CompositionSpec,
};
use compplan::product::{build_product, PlannerConfig, PlannerKind, ProductPlanner};
use compplan::scltl::{parse, to_dfa, Alphabet, Dfa};
use compplan::solver::{hardmax_vi, policy_csv, softmax_vi, values_csv, ChoiceModel, ViConfig};
use compplan::taskdecomp::{rank_states, rank_states_over, CompositionOp, TaskFile};
use compplan::{Error, Result};

#[derive(Parser)]
#[command(
    name = "compplan",
    version,
    about = "Compositional planning for MDPs under co-safe LTL tasks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Copy)]
struct Params {
    #[arg(long, default_value_t = 0.9)]
    gamma: f64,
    #[arg(long, default_value_t = 100.0)]
    alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    tau: f64,
    #[arg(long, default_value_t = compplan::solver::DEFAULT_TOL)]
    tol: f64,
    #[arg(long, default_value_t = compplan::solver::DEFAULT_MAX_ITER)]
    max_iter: usize,
}

impl Params {
    fn vi(&self) -> ViConfig {
        ViConfig {
            tol: self.tol,
            max_iter: self.max_iter,
            monitor: Vec::new(),
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum OperatorArg {
    Softmax,
    Hardmax,
}

#[derive(Clone, Copy, ValueEnum)]
enum OpArg {
    Or,
    And,
    Minus,
}

#[derive(Clone, Copy, ValueEnum)]
enum PlannerArg {
    Optimal,
    Action,
    Option,
    Mixed,
}

#[derive(Subcommand)]
enum Command {
    /// Translate an sc-LTL formula into a minimal DFA.
    Translate {
        #[arg(long)]
        formula: String,
        /// Comma-separated atomic propositions.
        #[arg(long)]
        ap: String,
        /// Strengthen `!C U F(...)` guards to cover the whole task.
        #[arg(long)]
        guarded: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Rank DFA states and extract conditional-reachability tasks.
    Decompose {
        #[arg(long)]
        dfa: PathBuf,
        /// Restrict symbols to the labels occurring in this MDP.
        #[arg(long)]
        mdp: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build a slippery grid-world MDP.
    BuildGrid {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve one task of a decomposition, `tasks.json#k` with 1-based `k`.
    Solve {
        #[arg(long)]
        task: String,
        #[arg(long)]
        mdp: PathBuf,
        #[arg(long, value_enum, default_value = "softmax")]
        operator: OperatorArg,
        #[command(flatten)]
        params: Params,
        #[arg(long)]
        out: PathBuf,
    },
    /// Synthesize primitive options for a decomposition and compose its
    /// composite tasks.
    SynthOptions {
        #[arg(long)]
        mdp: PathBuf,
        #[arg(long)]
        tasks: PathBuf,
        #[command(flatten)]
        params: Params,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compose options of a directory and append the result to it.
    Compose {
        #[arg(long, value_enum)]
        op: OpArg,
        /// Comma-separated 1-based option ids.
        #[arg(long, value_delimiter = ',')]
        operands: Vec<usize>,
        #[arg(long, allow_hyphen_values = true)]
        eta: f64,
        #[arg(long)]
        mdp: PathBuf,
        #[arg(long)]
        options: PathBuf,
        #[command(flatten)]
        params: Params,
    },
    /// Plan in the product of an MDP and a formula's DFA.
    Plan {
        #[arg(long)]
        mdp: PathBuf,
        #[arg(long)]
        formula: String,
        #[arg(long, value_enum)]
        planner: PlannerArg,
        #[arg(long)]
        options: Option<PathBuf>,
        #[arg(long)]
        guarded: bool,
        #[command(flatten)]
        params: Params,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run every experiment and write the report.
    Reproduce {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::Io {
            path: dir.to_path_buf(),
            source: e,
        })?;
    }
    std::fs::write(path, text).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Json {
        path: path.to_path_buf(),
        source: e,
    })?;
    write(path, &text)
}

fn translate(formula: &str, ap: &str, guarded: bool, out: &Path) -> Result<()> {
    let alphabet = Alphabet::new(ap.split(',').map(str::trim).filter(|s| !s.is_empty()))?;
    let mut f = parse(formula, &alphabet)?;
    if guarded {
        f = f.guard_eventualities();
    }
    let dfa = to_dfa(&f, &alphabet)?;
    dfa.save(out)?;
    println!("{} states", dfa.num_states());
    Ok(())
}

fn decompose_cmd(dfa: &Path, mdp: Option<&Path>, out: &Path) -> Result<()> {
    let dfa = Dfa::load(dfa)?;
    let ranked = match mdp {
        Some(p) => rank_states_over(&dfa, &LabeledMdp::load(p)?.label_symbols())?,
        None => rank_states(&dfa)?,
    };
    let file = TaskFile::new(&ranked)?;
    for t in &file.tasks {
        println!(
            "{}{}",
            t.text,
            if t.primitive { "  [primitive]" } else { "" }
        );
    }
    file.save(out)
}

fn solve(task: &str, mdp: &Path, operator: OperatorArg, p: Params, out: &Path) -> Result<()> {
    let (file, k) = task.rsplit_once('#').ok_or_else(|| {
        Error::InvalidParameter(format!("expected <tasks.json>#<k>, got `{task}`"))
    })?;
    let k: usize = k
        .parse()
        .map_err(|_| Error::InvalidParameter(format!("bad task index `{k}`")))?;
    let tasks = TaskFile::load(file)?;
    let entry = k
        .checked_sub(1)
        .and_then(|i| tasks.tasks.get(i))
        .ok_or_else(|| {
            Error::InvalidParameter(format!("task {k} out of range 1..={}", tasks.tasks.len()))
        })?;
    let mdp = LabeledMdp::load(mdp)?;
    let ssp = bind_task(&mdp, &entry.task, p.gamma, p.alpha, p.tau)?;
    let model = ChoiceModel::from_ssp(&ssp);
    let (vf, policy) = match operator {
        OperatorArg::Softmax => softmax_vi(&model, p.tau, &p.vi())?,
        OperatorArg::Hardmax => hardmax_vi(&model, &p.vi())?,
    };
    write(&out.join("values.csv"), &values_csv(&vf.values))?;
    write(&out.join("policy.csv"), &policy_csv(&policy))?;
    println!(
        "{}: {} iterations, residual {:.3e}",
        entry.text, vf.iterations, vf.residual
    );
    Ok(())
}

fn synth_options(mdp: &Path, tasks: &Path, p: Params, out: &Path) -> Result<()> {
    let mdp = LabeledMdp::load(mdp)?;
    let file = TaskFile::load(tasks)?;
    let mut options = Vec::new();
    for t in file.pruned.atomic_tasks() {
        options.push(make_primitive_option(
            t,
            &mdp,
            p.gamma,
            p.alpha,
            p.tau,
            &p.vi(),
        )?);
    }
    let ctx = ComposeContext {
        mdp: &mdp,
        gamma: p.gamma,
        alpha: p.alpha,
        tau: p.tau,
    };
    let n = options.len();
    for c in &file.pruned.composites {
        let operands = c
            .operands
            .iter()
            .map(|&a| {
                options[..n]
                    .iter()
                    .position(|o| o.task.goal.atom() == Some(a) && o.task.unsafe_ == c.task.unsafe_)
                    .ok_or_else(|| Error::Composition(format!("no option for atom {a}")))
            })
            .collect::<Result<Vec<_>>>()?;
        let eta = match c.op {
            CompositionOp::And => compplan::options::DEFAULT_ETA_AND,
            _ => compplan::options::DEFAULT_ETA_OR,
        };
        options.push(compose(
            &CompositionSpec::new(c.op, operands, eta),
            &options[..n],
            ctx,
        )?);
    }
    for (k, o) in options.iter().enumerate() {
        println!("o{} {}", k + 1, o.name);
    }
    save_options(out, &options)
}

fn compose_cmd(
    op: OpArg,
    operands: &[usize],
    eta: f64,
    mdp: &Path,
    dir: &Path,
    p: Params,
) -> Result<()> {
    let mdp = LabeledMdp::load(mdp)?;
    let mut options = load_options(dir)?;
    let operands = operands
        .iter()
        .map(|&k| {
            k.checked_sub(1)
                .filter(|&i| i < options.len())
                .ok_or_else(|| {
                    Error::InvalidParameter(format!(
                        "option {k} out of range 1..={}",
                        options.len()
                    ))
                })
        })
        .collect::<Result<Vec<_>>>()?;
    let op = match op {
        OpArg::Or => CompositionOp::Or,
        OpArg::And => CompositionOp::And,
        OpArg::Minus => CompositionOp::Minus,
    };
    let ctx = ComposeContext {
        mdp: &mdp,
        gamma: p.gamma,
        alpha: p.alpha,
        tau: p.tau,
    };
    let composed = compose(&CompositionSpec::new(op, operands, eta), &options, ctx)?;
    println!("o{} {}", options.len() + 1, composed.name);
    options.push(composed);
    save_options(dir, &options)
}

#[derive(Serialize)]
struct PlanSummary {
    planner: PlannerKind,
    formula: String,
    product_states: usize,
    p: f64,
    n: usize,
    t: f64,
}

#[derive(Serialize)]
struct PolicyEntry {
    s: usize,
    q: usize,
    choices: Vec<(String, f64)>,
}

#[allow(clippy::too_many_arguments)]
fn plan(
    mdp: &Path,
    formula: &str,
    planner: PlannerArg,
    options: Option<&Path>,
    guarded: bool,
    p: Params,
    out: &Path,
) -> Result<()> {
    let mdp = LabeledMdp::load(mdp)?;
    let mut f = parse(formula, mdp.ap())?;
    if guarded {
        f = f.guard_eventualities();
    }
    let dfa = to_dfa(&f, mdp.ap())?;
    let product = build_product(&mdp, &dfa)?;
    let options = match options {
        Some(dir) => load_options(dir)?,
        None => Vec::new(),
    };
    let kind = match planner {
        PlannerArg::Optimal => PlannerKind::Optimal,
        PlannerArg::Action => PlannerKind::Action,
        PlannerArg::Option => PlannerKind::Option,
        PlannerArg::Mixed => PlannerKind::Mixed,
    };
    let start = std::time::Instant::now();
    let planner = ProductPlanner::new(&product, &options, p.gamma, p.alpha, p.tau)?;
    let result = planner.plan(&PlannerConfig {
        kind,
        tol: p.tol,
        max_iter: p.max_iter,
    })?;
    let t = start.elapsed().as_secs_f64();

    write(
        &out.join("values.csv"),
        &product.values_csv(&result.values.values),
    )?;
    let policy: Vec<PolicyEntry> = (0..product.num_states())
        .map(|i| {
            let (s, q) = product.state(i);
            let choices = result.policy.rows[i]
                .iter()
                .map(|&(id, pr)| {
                    let name = match id {
                        compplan::solver::ChoiceId::Action(a) => mdp.action_names()[a].clone(),
                        compplan::solver::ChoiceId::Option(o) => format!("o{}", o + 1),
                    };
                    (name, pr)
                })
                .collect();
            PolicyEntry { s, q, choices }
        })
        .collect();
    write_json(&out.join("policy.json"), &policy)?;
    let mut trace = String::from("iteration,value,residual\n");
    for tp in result.trace() {
        trace.push_str(&format!("{},{},{}\n", tp.iteration, tp.value, tp.residual));
    }
    write(&out.join("trace.csv"), &trace)?;
    let summary = PlanSummary {
        planner: kind,
        formula: f.display(mdp.ap()).to_string(),
        product_states: product.num_states(),
        p: result.probability,
        n: result.iterations(),
        t,
    };
    write_json(&out.join("summary.json"), &summary)?;
    println!("p={:.6} n={} t={:.3}s", summary.p, summary.n, summary.t);
    Ok(())
}

fn reproduce(config: Option<&Path>, out: &Path) -> Result<bool> {
    let config = match config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    let report = run_all(config, out)?;
    for g in &report.gates {
        println!(
            "{} {}: {}",
            if g.passed { "PASS" } else { "FAIL" },
            g.name,
            g.detail
        );
    }
    Ok(report.passed())
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Translate {
            formula,
            ap,
            guarded,
            out,
        } => translate(&formula, &ap, guarded, &out)?,
        Command::Decompose { dfa, mdp, out } => decompose_cmd(&dfa, mdp.as_deref(), &out)?,
        Command::BuildGrid { spec, out } => {
            let mdp = build_gridworld(&GridWorldSpec::load(&spec)?)?;
            mdp.save(&out)?;
            println!(
                "{} states, propositions {:?}",
                mdp.num_states(),
                mdp.ap().atoms()
            );
        }
        Command::Solve {
            task,
            mdp,
            operator,
            params,
            out,
        } => solve(&task, &mdp, operator, params, &out)?,
        Command::SynthOptions {
            mdp,
            tasks,
            params,
            out,
        } => synth_options(&mdp, &tasks, params, &out)?,
        Command::Compose {
            op,
            operands,
            eta,
            mdp,
            options,
            params,
        } => compose_cmd(op, &operands, eta, &mdp, &options, params)?,
        Command::Plan {
            mdp,
            formula,
            planner,
            options,
            guarded,
            params,
            out,
        } => plan(
            &mdp,
            &formula,
            planner,
            options.as_deref(),
            guarded,
            params,
            &out,
        )?,
        Command::Reproduce { config, out } => return reproduce(config.as_deref(), &out),
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("error: acceptance gates failed");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
