use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{
    run_composition_study, run_planner_comparison, run_policy_deviation, CompositionCase,
    CompositionStudy, Deviation, Experiment, ExperimentConfig, RelativeError, TaskPlans,
};
use crate::error::{Error, Result};
use crate::mdp::GridWorldSpec;
use crate::product::PlannerKind;
use crate::solver::write_text;

pub const OR_TOLERANCE: f64 = 1e-2;
pub const AND_TOLERANCE: f64 = 5e-2;
pub const OPTION_GAP: f64 = 0.15;
pub const DEVIATION_LIMIT: f64 = 0.2;
const SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSummary {
    pub name: String,
    /// Formula as planned, after any guard rewrite.
    pub formula: String,
    pub dfa_states: usize,
    pub product_states: usize,
    pub primitives: Vec<String>,
    pub composites: Vec<String>,
    pub options: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table1Row {
    pub task: String,
    pub planner: PlannerKind,
    pub probability: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table2Row {
    pub task: String,
    pub option_vs_action: RelativeError,
    pub mixed_vs_action: RelativeError,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompositionSummary {
    pub op: String,
    pub eta: f64,
    pub error: RelativeError,
    pub error_vs_optimal: RelativeError,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gate {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// Deterministic summary of a run; wall-clock times live in [`Timings`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: ExperimentConfig,
    pub tasks: Vec<TaskSummary>,
    pub composition: Vec<CompositionSummary>,
    pub table1: Vec<Table1Row>,
    pub table2: Vec<Table2Row>,
    pub gates: Vec<Gate>,
}

impl RunReport {
    pub fn passed(&self) -> bool {
        self.gates.iter().all(|g| g.passed)
    }

    pub fn failures(&self) -> Vec<&Gate> {
        self.gates.iter().filter(|g| !g.passed).collect()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub setup: f64,
    pub composition: f64,
    pub planners: Vec<(String, String, f64)>,
    pub deviation: f64,
    pub total: f64,
}

fn gate(name: impl Into<String>, passed: bool, detail: String) -> Gate {
    Gate {
        name: name.into(),
        passed,
        detail,
    }
}

fn within(e: &RelativeError, tol: f64) -> bool {
    e.e2 <= tol && e.einf <= tol
}

fn gates(study: &CompositionStudy, plans: &[TaskPlans], dev: &[Deviation]) -> Vec<Gate> {
    let mut out = vec![
        gate(
            "composition_or",
            within(&study.or.error, OR_TOLERANCE),
            format!(
                "e2={:.3e} einf={:.3e} tol={OR_TOLERANCE}",
                study.or.error.e2, study.or.error.einf
            ),
        ),
        gate(
            "composition_and",
            within(&study.and.error, AND_TOLERANCE),
            format!(
                "e2={:.3e} einf={:.3e} tol={AND_TOLERANCE}",
                study.and.error.e2, study.and.error.einf
            ),
        ),
    ];
    for tp in plans {
        let n = |k| tp.get(k).iterations();
        let p = |k| tp.get(k).probability;
        let (no, nm, na) = (
            n(PlannerKind::Option),
            n(PlannerKind::Mixed),
            n(PlannerKind::Action),
        );
        out.push(gate(
            format!("iterations_{}", tp.task),
            no < nm && nm < na,
            format!("option={no} mixed={nm} action={na}"),
        ));
        let popt = p(PlannerKind::Optimal);
        let others = [PlannerKind::Action, PlannerKind::Option, PlannerKind::Mixed];
        out.push(gate(
            format!("optimal_dominates_{}", tp.task),
            others.iter().all(|&k| popt + SLACK >= p(k)),
            format!(
                "optimal={popt:.6} action={:.6} option={:.6} mixed={:.6}",
                p(PlannerKind::Action),
                p(PlannerKind::Option),
                p(PlannerKind::Mixed)
            ),
        ));
    }
    if let Some(tp) = plans.first() {
        let popt = tp.get(PlannerKind::Optimal).probability;
        let pop = tp.get(PlannerKind::Option).probability;
        out.push(gate(
            format!("option_near_optimal_{}", tp.task),
            pop >= (1.0 - OPTION_GAP) * popt,
            format!("option={pop:.6} optimal={popt:.6} gap={OPTION_GAP}"),
        ));
    }
    for d in dev {
        let all = [d.option_vs_action, d.mixed_vs_action];
        out.push(gate(
            format!("deviation_{}", d.task),
            d.mixed_vs_action.einf < d.option_vs_action.einf
                && all
                    .iter()
                    .all(|e| e.e2 < DEVIATION_LIMIT && e.einf < DEVIATION_LIMIT),
            format!(
                "option: e2={:.4} einf={:.4}; mixed: e2={:.4} einf={:.4}",
                d.option_vs_action.e2,
                d.option_vs_action.einf,
                d.mixed_vs_action.e2,
                d.mixed_vs_action.einf
            ),
        ));
    }
    out
}

/// Grid heatmap, one row per `y`. Goal cells read `alpha`, unsafe cells 0.
fn heatmap(grid: &GridWorldSpec, values: &[f64], case: &CompositionCase, alpha: f64) -> String {
    let mut out = String::new();
    for y in 0..grid.height {
        let row: Vec<String> = (0..grid.width)
            .map(|x| {
                let s = y * grid.width + x;
                let v = if case.goal[s] {
                    alpha
                } else if case.unsafe_[s] {
                    0.0
                } else {
                    values[s]
                };
                v.to_string()
            })
            .collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

fn trace_csv(tp: &TaskPlans) -> String {
    let mut out = String::from("planner,iteration,value,residual\n");
    for p in &tp.plans {
        for t in p.trace() {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                p.kind.name(),
                t.iteration,
                t.value,
                t.residual
            );
        }
    }
    out
}

fn summary_md(report: &RunReport) -> String {
    let mut s = String::from(
        "# Run summary\n\n## Composition\n\n| op | eta | e2 | einf |\n|---|---|---|---|\n",
    );
    for c in &report.composition {
        let _ = writeln!(
            s,
            "| {} | {} | {:.3e} | {:.3e} |",
            c.op, c.eta, c.error.e2, c.error.einf
        );
    }
    s.push_str("\n## Planners\n\n| task | planner | P | iterations |\n|---|---|---|---|\n");
    for r in &report.table1 {
        let _ = writeln!(
            s,
            "| {} | {} | {:.4} | {} |",
            r.task,
            r.planner.name(),
            r.probability,
            r.iterations
        );
    }
    s.push_str("\n## Deviation from the action planner\n\n| task | option e2 | option einf | mixed e2 | mixed einf |\n|---|---|---|---|---|\n");
    for r in &report.table2 {
        let _ = writeln!(
            s,
            "| {} | {:.4} | {:.4} | {:.4} | {:.4} |",
            r.task,
            r.option_vs_action.e2,
            r.option_vs_action.einf,
            r.mixed_vs_action.e2,
            r.mixed_vs_action.einf
        );
    }
    s.push_str("\n## Gates\n\n");
    for g in &report.gates {
        let _ = writeln!(
            s,
            "- {} {}: {}",
            if g.passed { "PASS" } else { "FAIL" },
            g.name,
            g.detail
        );
    }
    s
}

fn json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::json(path, e))?;
    write_text(path, &(text + "\n"))
}

/// Writes every artifact of a finished run under `out`.
pub fn write_outputs(
    out: &Path,
    exp: &Experiment,
    study: &CompositionStudy,
    plans: &[TaskPlans],
    report: &RunReport,
    timings: &Timings,
) -> Result<()> {
    let alpha = exp.config.alpha;
    let comp = out.join("composition");
    for (name, case) in [("or", &study.or), ("and", &study.and)] {
        write_text(
            &comp.join(format!("fig3_{name}_direct.csv")),
            &heatmap(&exp.grid, &case.direct, case, alpha),
        )?;
        write_text(
            &comp.join(format!("fig3_{name}_composed.csv")),
            &heatmap(&exp.grid, &case.composed, case, alpha),
        )?;
        write_text(
            &comp.join(format!("fig3_{name}_optimal.csv")),
            &heatmap(&exp.grid, &case.optimal, case, alpha),
        )?;
    }
    let planners = out.join("planners");
    let mut t1 = String::from("task,planner,probability,iterations\n");
    for r in &report.table1 {
        let _ = writeln!(
            t1,
            "{},{},{},{}",
            r.task,
            r.planner.name(),
            r.probability,
            r.iterations
        );
    }
    write_text(&planners.join("table1.csv"), &t1)?;
    for tp in plans {
        write_text(
            &planners.join(format!("fig4_{}.csv", tp.task)),
            &trace_csv(tp),
        )?;
    }
    let mut t2 = String::from("task,pair,e2,einf\n");
    for r in &report.table2 {
        for (pair, e) in [
            ("option_vs_action", r.option_vs_action),
            ("mixed_vs_action", r.mixed_vs_action),
        ] {
            let _ = writeln!(t2, "{},{pair},{},{}", r.task, e.e2, e.einf);
        }
    }
    write_text(&out.join("deviation").join("table2.csv"), &t2)?;
    json(&out.join("config.json"), &exp.config)?;
    json(&out.join("report.json"), report)?;
    json(&out.join("timings.json"), timings)?;
    write_text(&out.join("summary.md"), &summary_md(report))
}

fn build_report(
    exp: &Experiment,
    study: &CompositionStudy,
    plans: &[TaskPlans],
    dev: &[Deviation],
) -> RunReport {
    let ap = exp.mdp.ap();
    let tasks = exp
        .tasks
        .iter()
        .zip(plans)
        .map(|(t, tp)| TaskSummary {
            name: t.name.clone(),
            formula: t.formula.display(ap).to_string(),
            dfa_states: t.dfa.num_states(),
            product_states: tp.product.num_states(),
            primitives: t
                .decomposition
                .atomic_tasks()
                .map(|c| c.describe(ap))
                .collect(),
            composites: t
                .decomposition
                .composites
                .iter()
                .map(|c| c.task.describe(ap))
                .collect(),
            options: tp.options.iter().map(|o| o.name.clone()).collect(),
        })
        .collect();
    let composition = [&study.or, &study.and]
        .iter()
        .map(|c| CompositionSummary {
            op: c.op.to_string(),
            eta: c.eta,
            error: c.error,
            error_vs_optimal: c.error_vs_optimal,
        })
        .collect();
    let table1 = plans
        .iter()
        .flat_map(|tp| {
            tp.plans.iter().map(|p| Table1Row {
                task: tp.task.clone(),
                planner: p.kind,
                probability: p.probability,
                iterations: p.iterations(),
            })
        })
        .collect();
    let table2 = dev
        .iter()
        .map(|d| Table2Row {
            task: d.task.clone(),
            option_vs_action: d.option_vs_action,
            mixed_vs_action: d.mixed_vs_action,
        })
        .collect();
    RunReport {
        config: exp.config.clone(),
        tasks,
        composition,
        table1,
        table2,
        gates: gates(study, plans, dev),
    }
}

/// Runs every study, writes the artifacts under `out` and returns the
/// report. Gate failures are reported in the result, not as an error.
pub fn run_all(config: ExperimentConfig, out: &Path) -> Result<RunReport> {
    let start = Instant::now();
    let mut timings = Timings::default();
    let exp = Experiment::new(config)?;
    timings.setup = start.elapsed().as_secs_f64();

    let t = Instant::now();
    let study = run_composition_study(&exp)?;
    timings.composition = t.elapsed().as_secs_f64();

    let plans = run_planner_comparison(&exp)?;
    for tp in &plans {
        for (p, &secs) in tp.plans.iter().zip(&tp.seconds) {
            timings
                .planners
                .push((tp.task.clone(), p.kind.name().to_string(), secs));
        }
    }

    let t = Instant::now();
    let dev = run_policy_deviation(&exp, &plans)?;
    timings.deviation = t.elapsed().as_secs_f64();
    timings.total = start.elapsed().as_secs_f64();

    let report = build_report(&exp, &study, &plans, &dev);
    write_outputs(out, &exp, &study, &plans, &report, &timings)?;
    Ok(report)
}
