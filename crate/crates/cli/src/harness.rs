//! Variant execution, plan files and benchmark tables.

use std::fmt::Write as _;
use std::path::Path;

use bladecrawl::search::{
    plan, validate_plan, ActionDeltas, FailureReason, Plan, PlanOutcome, PlannerConfig, Problem,
};
use bladecrawl::robot::{Configuration, TransitionSteps};
use rayon::prelude::*;
use thiserror::Error;

use crate::scenario::{fmt_f, load_scenario, Scenario, ScenarioError};
use crate::variant::{apply_overrides, Variant};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("benchmark suite is empty")]
    EmptySuite,
    #[error("no variants selected")]
    NoVariants,
    #[error("{0}")]
    Scenario(#[from] ScenarioError),
    #[error("plan file line {line}: {msg}")]
    PlanFile { line: usize, msg: String },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Planner defaults for the desk-scale robot.
pub fn desk_config() -> PlannerConfig {
    let mut cfg = PlannerConfig {
        heuristic_weight: 5.0,
        deltas: ActionDeltas { revolute: 0.02, prismatic: 0.02 },
        steps: TransitionSteps { revolute: 0.01, prismatic: 0.01 },
        eps: 0.04,
        eps_pos: 0.03,
        ..PlannerConfig::default()
    };
    cfg.optimizer.eps_reach = cfg.eps / 2.0;
    // Joint steps that move the tip by a few centimeters need a small initial
    // spread and a strong pull toward the parent state.
    cfg.optimizer.sigma0 = 0.01;
    cfg.optimizer.weights.lambda = 100.0;
    cfg.optimizer.weights.gamma = 30.0;
    cfg
}

/// Run-wide settings shared by every (scenario, variant) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub base: PlannerConfig,
    pub timeout: Option<f64>,
    pub eval_budget: Option<u64>,
    /// Planner seeds; each pair runs once per seed.
    pub seeds: Vec<u64>,
    /// Record wall-clock planning time. When off, times print as `-` and
    /// rows are reproducible byte for byte.
    pub record_time: bool,
    pub parallel: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            base: desk_config(),
            timeout: Some(60.0),
            eval_budget: None,
            seeds: vec![0],
            record_time: true,
            parallel: 1,
        }
    }
}

impl RunOptions {
    /// Planner configuration for one run.
    pub fn config(&self, scenario: &Scenario, variant: &Variant, seed: u64) -> Result<PlannerConfig, HarnessError> {
        let mut cfg = self.base.clone();
        apply_overrides(&mut cfg, &scenario.planner).map_err(HarnessError::Config)?;
        variant.apply(&mut cfg);
        cfg.timeout = self.timeout;
        if self.eval_budget.is_some() {
            cfg.eval_budget = self.eval_budget;
        }
        cfg.seed = seed;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub variant: String,
    pub scenario: String,
    pub seed: u64,
    pub success: bool,
    /// Seconds; the timeout for failures; `None` when timing is off.
    pub planning_time: Option<f64>,
    pub cost: Option<f64>,
    pub expansions: usize,
    pub optimizer_calls: usize,
    pub pseudostates_discarded: usize,
    pub evaluations: u64,
    pub reason: String,
}

pub const TSV_HEADER: &str = "variant\tscenario\tseed\tsuccess\tplanning_time_s\tcost\texpansions\toptimizer_calls\tpseudostates_discarded\tevaluations\treason";

impl MetricsRow {
    pub fn to_tsv(&self) -> String {
        let t = self.planning_time.map_or("-".to_string(), |t| format!("{t:.3}"));
        let c = self.cost.map_or("-".to_string(), |c| format!("{c:.6}"));
        format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            self.variant,
            self.scenario,
            self.seed,
            self.success,
            t,
            c,
            self.expansions,
            self.optimizer_calls,
            self.pseudostates_discarded,
            self.evaluations,
            self.reason
        )
    }
}

fn failure_name(f: FailureReason) -> &'static str {
    match f {
        FailureReason::Timeout => "timeout",
        FailureReason::BudgetExhausted => "budget",
        FailureReason::OpenExhausted => "exhausted",
    }
}

/// Plans one scenario with one variant and seed. Planner errors become
/// failed rows.
pub fn run_variant(
    scenario: &Scenario,
    problem: &Problem,
    variant: &Variant,
    seed: u64,
    opts: &RunOptions,
) -> (MetricsRow, Option<Plan>) {
    let mut row = MetricsRow {
        variant: variant.to_string(),
        scenario: scenario.name.clone(),
        seed,
        success: false,
        planning_time: None,
        cost: None,
        expansions: 0,
        optimizer_calls: 0,
        pseudostates_discarded: 0,
        evaluations: 0,
        reason: String::new(),
    };
    let cfg = match opts.config(scenario, variant, seed) {
        Ok(c) => c,
        Err(e) => {
            row.reason = e.to_string().replace('\t', " ");
            return (row, None);
        }
    };
    let timeout_time = || opts.record_time.then(|| opts.timeout.unwrap_or(f64::INFINITY));
    match plan(problem, &cfg) {
        Err(e) => {
            row.reason = e.to_string().replace('\t', " ");
            row.planning_time = timeout_time();
            (row, None)
        }
        Ok(PlanOutcome { plan: found, failure, stats }) => {
            row.expansions = stats.expansions;
            row.optimizer_calls = stats.optimizer_calls;
            row.pseudostates_discarded = stats.pseudostates_discarded;
            row.evaluations = stats.evaluations;
            match found {
                Some(p) => {
                    if let Err(e) = validate_plan(problem, &cfg, &p) {
                        row.reason = format!("revalidation failed: {e}");
                        row.planning_time = timeout_time();
                        return (row, None);
                    }
                    row.success = true;
                    row.cost = Some(p.cost);
                    row.planning_time =
                        opts.record_time.then_some(stats.setup_seconds + stats.search_seconds);
                    row.reason = "ok".into();
                    (row, Some(p))
                }
                None => {
                    row.reason = failure.map_or("unknown", failure_name).to_string();
                    row.planning_time = timeout_time();
                    (row, None)
                }
            }
        }
    }
}

/// Writes a plan: a short header, then one joint vector per line.
pub fn plan_to_text(scenario: &str, variant: &str, plan: &Plan) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# bladecrawl plan");
    let _ = writeln!(s, "scenario = {scenario}");
    let _ = writeln!(s, "variant = {variant}");
    let _ = writeln!(s, "cost = {}", plan.cost);
    let _ = writeln!(s, "states = {}", plan.states.len());
    for c in &plan.states {
        let v: Vec<String> = c.to_vector().iter().map(|x| fmt_f(*x)).collect();
        let _ = writeln!(s, "{}", v.join(" "));
    }
    s
}

pub fn parse_plan(text: &str) -> Result<Plan, HarnessError> {
    let mut cost = None;
    let mut expected = None;
    let mut states = Vec::new();
    let err = |line: usize, msg: &str| HarnessError::PlanFile { line, msg: msg.to_string() };
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some((k, v)) = line.split_once('=') {
            match k.trim() {
                "cost" => cost = Some(v.trim().parse::<f64>().map_err(|_| err(i + 1, "bad cost"))?),
                "states" => expected = Some(v.trim().parse::<usize>().map_err(|_| err(i + 1, "bad state count"))?),
                "scenario" | "variant" => {}
                _ => return Err(err(i + 1, "unknown header key")),
            }
            continue;
        }
        let v: Result<Vec<f64>, _> = line.split_whitespace().map(str::parse).collect();
        let v = v.map_err(|_| err(i + 1, "bad joint value"))?;
        if v.len() < 3 || v.len() % 2 == 0 {
            return Err(err(i + 1, "joint vector must have 2N+1 entries"));
        }
        states.push(Configuration::from_vector(&v));
    }
    if states.is_empty() {
        return Err(err(0, "plan has no states"));
    }
    if expected.is_some_and(|n| n != states.len()) {
        return Err(err(0, "state count does not match header"));
    }
    Ok(Plan { states, cost: cost.ok_or_else(|| err(0, "missing cost"))? })
}

pub fn write_plan(path: &Path, scenario: &str, variant: &str, plan: &Plan) -> std::io::Result<()> {
    std::fs::write(path, plan_to_text(scenario, variant, plan))
}

/// Per-variant summary.
#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub variant: String,
    pub runs: usize,
    pub successes: usize,
    /// Over successful runs only; `None` if timing is off or none succeeded.
    pub mean_time: Option<f64>,
    /// Median expansions with failed runs ranked last; `None` if more than
    /// half failed.
    pub median_expansions: Option<usize>,
}

impl Aggregate {
    pub fn success_rate(&self) -> f64 {
        if self.runs == 0 {
            0.0
        } else {
            100.0 * self.successes as f64 / self.runs as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchTable {
    pub rows: Vec<MetricsRow>,
    pub aggregates: Vec<Aggregate>,
}

pub fn aggregate(rows: &[MetricsRow], variants: &[Variant]) -> Vec<Aggregate> {
    variants
        .iter()
        .map(|v| {
            let name = v.to_string();
            let mine: Vec<&MetricsRow> = rows.iter().filter(|r| r.variant == name).collect();
            let ok: Vec<&&MetricsRow> = mine.iter().filter(|r| r.success).collect();
            let times: Vec<f64> = ok.iter().filter_map(|r| r.planning_time).collect();
            let mean_time = (!times.is_empty() && times.len() == ok.len())
                .then(|| times.iter().sum::<f64>() / times.len() as f64);
            let mut exp: Vec<Option<usize>> =
                mine.iter().map(|r| r.success.then_some(r.expansions)).collect();
            exp.sort_by_key(|e| e.unwrap_or(usize::MAX));
            let median_expansions = if exp.is_empty() { None } else { exp[(exp.len() - 1) / 2] };
            Aggregate { variant: name, runs: mine.len(), successes: ok.len(), mean_time, median_expansions }
        })
        .collect()
}

impl BenchTable {
    pub fn aggregate_for(&self, variant: &Variant) -> Option<&Aggregate> {
        let name = variant.to_string();
        self.aggregates.iter().find(|a| a.variant == name)
    }

    pub fn to_tsv(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{TSV_HEADER}");
        for r in &self.rows {
            let _ = writeln!(s, "{}", r.to_tsv());
        }
        s
    }

    /// Human-readable block; mean time excludes failed runs.
    pub fn summary(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# mean planning time is over successful runs only; failures count as the timeout in rows");
        let _ = writeln!(s, "# median expansions ranks failed runs last");
        let _ = writeln!(s, "{:<45} {:>5} {:>9} {:>12} {:>12}", "variant", "runs", "success%", "mean_time_s", "median_exp");
        for a in &self.aggregates {
            let t = a.mean_time.map_or("-".to_string(), |t| format!("{t:.3}"));
            let m = a.median_expansions.map_or("-".to_string(), |m| m.to_string());
            let _ = writeln!(s, "{:<45} {:>5} {:>9.1} {:>12} {:>12}", a.variant, a.runs, a.success_rate(), t, m);
        }
        s
    }
}

/// Loads every `*.scn` file in `dir`, sorted by file name.
pub fn load_suite(dir: &Path) -> Result<Vec<Scenario>, HarnessError> {
    let mut paths: Vec<_> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "scn"))
        .collect();
    paths.sort();
    paths.iter().map(|p| load_scenario(p).map_err(HarnessError::from)).collect()
}

/// Runs every (scenario, variant, seed) triple; rows come back in suite
/// order, then variant order, then seed order.
pub fn run_benchmark(
    suite: &[Scenario],
    variants: &[Variant],
    opts: &RunOptions,
) -> Result<BenchTable, HarnessError> {
    if suite.is_empty() {
        return Err(HarnessError::EmptySuite);
    }
    if variants.is_empty() {
        return Err(HarnessError::NoVariants);
    }
    let problems = suite.iter().map(|s| s.problem()).collect::<Result<Vec<_>, _>>()?;
    let mut jobs = Vec::new();
    for (si, _) in suite.iter().enumerate() {
        for v in variants {
            for &seed in &opts.seeds {
                jobs.push((si, *v, seed));
            }
        }
    }
    let run = |&(si, v, seed): &(usize, Variant, u64)| run_variant(&suite[si], &problems[si], &v, seed, opts).0;
    let rows: Vec<MetricsRow> = if opts.parallel > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(opts.parallel)
            .build()
            .map_err(|e| HarnessError::Config(e.to_string()))?;
        pool.install(|| jobs.par_iter().map(run).collect())
    } else {
        jobs.iter().map(run).collect()
    };
    let aggregates = aggregate(&rows, variants);
    Ok(BenchTable { rows, aggregates })
}
