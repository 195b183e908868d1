use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use bladecrawl_cli::harness::{load_suite, parse_plan, run_benchmark, run_variant, write_plan, RunOptions, TSV_HEADER};
use bladecrawl_cli::scenario::load_scenario;
use bladecrawl_cli::suite::{generate_suite, write_suite, Difficulty};
use bladecrawl_cli::svg::render_svg;
use bladecrawl_cli::variant::Variant;
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "bladecrawl", version, about = "Serpentine manipulator planning through blade arrays")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Plan one scenario and print one metrics row per variant.
    Plan {
        scenario: PathBuf,
        /// Repeatable; `all` expands to the full 18-variant grid.
        #[arg(long, default_value = "predefined_opt_lazy+homotopy_k2+dts")]
        variant: Vec<String>,
        #[arg(long, default_value_t = 60.0)]
        timeout: f64,
        /// Cap on validity checks plus objective evaluations.
        #[arg(long)]
        budget: Option<u64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Directory for `<scenario>.<variant>.plan` files.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every scenario in a directory against a set of variants.
    Bench {
        suite: PathBuf,
        /// Comma-separated variant names, or `all`.
        #[arg(long, default_value = "all")]
        variants: String,
        #[arg(long, default_value_t = 60.0)]
        timeout: f64,
        #[arg(long)]
        budget: Option<u64>,
        /// Comma-separated planner seeds.
        #[arg(long, default_value = "0")]
        seeds: String,
        #[arg(long, default_value_t = 1)]
        parallel: usize,
        /// Print `-` instead of wall-clock times so rows are reproducible.
        #[arg(long)]
        no_time: bool,
        /// Write per-run rows here instead of stdout.
        #[arg(long)]
        rows: Option<PathBuf>,
    },
    /// Generate a procedural scenario suite.
    GenSuite {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 20)]
        count: usize,
        #[arg(long, default_value = "clutter")]
        difficulty: Difficulty,
        #[arg(long, default_value = "suite")]
        out: PathBuf,
    },
    /// Draw the x-z projection of a scenario and a plan.
    Render { scenario: PathBuf, plan: PathBuf, svg: PathBuf },
}

fn parse_variants<S: AsRef<str>>(names: &[S]) -> Result<Vec<Variant>> {
    let mut out = Vec::new();
    for n in names {
        match n.as_ref().trim() {
            "all" => out.extend(Variant::all()),
            s => out.push(s.parse::<Variant>().map_err(anyhow::Error::msg)?),
        }
    }
    if out.is_empty() {
        bail!("no variants given");
    }
    Ok(out)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Plan { scenario, variant, timeout, budget, seed, out } => {
            let variants = parse_variants(&variant)?;
            let sc = load_scenario(&scenario).with_context(|| format!("loading {}", scenario.display()))?;
            let problem = sc.problem()?;
            let opts = RunOptions { timeout: Some(timeout), eval_budget: budget, ..Default::default() };
            if let Some(dir) = &out {
                std::fs::create_dir_all(dir)?;
            }
            println!("{TSV_HEADER}");
            for v in &variants {
                let (row, plan) = run_variant(&sc, &problem, v, seed, &opts);
                println!("{}", row.to_tsv());
                if let (Some(dir), Some(p)) = (&out, plan) {
                    let path = dir.join(format!("{}.{}.plan", sc.name, v));
                    write_plan(&path, &sc.name, &v.to_string(), &p)
                        .with_context(|| format!("writing {}", path.display()))?;
                }
            }
        }
        Command::Bench { suite, variants, timeout, budget, seeds, parallel, no_time, rows } => {
            let variants = parse_variants(&variants.split(',').collect::<Vec<_>>())?;
            let seeds = seeds
                .split(',')
                .map(|s| s.trim().parse::<u64>())
                .collect::<Result<Vec<_>, _>>()
                .context("parsing --seeds")?;
            let scenarios = load_suite(&suite).with_context(|| format!("loading suite {}", suite.display()))?;
            let opts = RunOptions {
                timeout: Some(timeout),
                eval_budget: budget,
                seeds,
                record_time: !no_time,
                parallel: parallel.max(1),
                ..Default::default()
            };
            let table = run_benchmark(&scenarios, &variants, &opts)?;
            match rows {
                Some(path) => std::fs::write(&path, table.to_tsv()).with_context(|| format!("writing {}", path.display()))?,
                None => print!("{}", table.to_tsv()),
            }
            print!("{}", table.summary());
        }
        Command::GenSuite { seed, count, difficulty, out } => {
            let suite = generate_suite(seed, count, difficulty)?;
            for p in write_suite(&out, &suite)? {
                println!("{}", p.display());
            }
        }
        Command::Render { scenario, plan, svg } => {
            let sc = load_scenario(&scenario).with_context(|| format!("loading {}", scenario.display()))?;
            let text = std::fs::read_to_string(&plan).with_context(|| format!("reading {}", plan.display()))?;
            let p = parse_plan(&text)?;
            render_svg(&sc, &p, &svg)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
