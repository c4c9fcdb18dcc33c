use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use heatlab::solver::ProblemSpec;

use crate::commands;
use crate::config::{parse_config, ExperimentConfig};
use crate::error::{CliError, Result};
use crate::io::write_json;

#[derive(Debug, Parser)]
#[command(
    name = "heatlab",
    version,
    about = "Blow-up experiments for forced heat equations with a power potential"
)]
pub struct Cli {
    /// Experiment config (TOML, or JSON by extension).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory; overrides `output_dir` from the config.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads for `sweep`.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Overrides `seed` from the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Closed-form critical exponents as JSON.
    Exponents {
        #[arg(long)]
        dim: Option<u32>,
        #[arg(long, allow_hyphen_values = true)]
        alpha: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        sigma: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        m: Option<f64>,
    },
    /// Theorem-based blow-up prediction for the configured problem.
    Criterion,
    /// Cesàro limit and critical tail exponent of the configured forcing.
    ClassifyForcing,
    /// Runs the solver and writes a trace directory.
    Solve,
    /// Checks a trace directory; exits 3 when a check fails.
    Verify {
        #[arg(long)]
        trace: PathBuf,
    },
    /// Runs the configured grid of problems in parallel.
    Sweep,
    /// Writes a plot-ready CSV.
    Emit {
        #[arg(long)]
        kind: String,
        #[arg(long)]
        input: Option<PathBuf>,
    },
}

fn load(path: Option<&Path>) -> Result<Option<ExperimentConfig>> {
    path.map(parse_config).transpose()
}

fn require(cfg: Option<ExperimentConfig>, what: &str) -> Result<ExperimentConfig> {
    cfg.ok_or_else(|| CliError::Validation(format!("{what} needs --config")))
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn emit_json<T: serde::Serialize>(value: &T, out: Option<&Path>, name: &str) -> Result<()> {
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        write_json(&dir.join(name), value)?;
    }
    print_json(value)
}

pub fn execute(cli: Cli) -> Result<()> {
    let cfg = load(cli.config.as_deref())?;
    let seed = cli.seed.or(cfg.as_ref().map(|c| c.seed)).unwrap_or(0);
    let out_dir = |cfg: &ExperimentConfig| cli.out.clone().unwrap_or_else(|| cfg.output_dir.clone());
    match cli.command {
        Command::Exponents { dim, alpha, sigma, m } => {
            let problem: Option<&ProblemSpec> = cfg.as_ref().map(|c| &c.problem);
            let dim = dim
                .or(problem.map(|p| p.dim))
                .ok_or_else(|| CliError::Validation("exponents needs --dim or --config".into()))?;
            let alpha = alpha.or(problem.map(|p| p.alpha)).unwrap_or(0.0);
            let report = commands::exponents(dim, alpha, sigma, m)?;
            emit_json(&report, cli.out.as_deref(), "exponents.json")
        }
        Command::Criterion => {
            let cfg = require(cfg, "criterion")?;
            let report = commands::criterion_for(&cfg.problem, &cfg.classification)?;
            emit_json(&report, cli.out.as_deref(), "criterion.json")
        }
        Command::ClassifyForcing => {
            let cfg = require(cfg, "classify-forcing")?;
            let report = commands::classify(&cfg.problem.forcing, &cfg.classification);
            emit_json(&report, cli.out.as_deref(), "forcing.json")
        }
        Command::Solve => {
            let cfg = require(cfg, "solve")?;
            let out = out_dir(&cfg);
            let verdict = commands::solve_to_dir(&cfg, seed, &out)?;
            print_json(&verdict)
        }
        Command::Verify { ref trace } => {
            let out = cli.out.clone().unwrap_or_else(|| trace.clone());
            let report = commands::verify_dir(trace, cfg.as_ref(), &out)?;
            print_json(&report)?;
            if report.all_passed {
                Ok(())
            } else {
                let failed: Vec<String> = report
                    .checks
                    .iter()
                    .filter(|c| c.status == commands::CheckStatus::Fail)
                    .map(|c| match c.radius {
                        Some(r) => format!("{} (R = {r})", c.name),
                        None => c.name.clone(),
                    })
                    .collect();
                Err(CliError::VerificationFailed(failed.join(", ")))
            }
        }
        Command::Sweep => {
            let cfg = require(cfg, "sweep")?;
            let workers = cli
                .workers
                .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
            let out = out_dir(&cfg);
            let summary = commands::sweep_to_dir(&cfg, workers, seed, &out)?;
            let mut brief = serde_json::to_value(&summary)?;
            if let Some(obj) = brief.as_object_mut() {
                obj.remove("rows");
            }
            print_json(&brief)
        }
        Command::Emit { ref kind, ref input } => {
            let out = cli
                .out
                .clone()
                .or_else(|| cfg.as_ref().map(|c| c.output_dir.clone()))
                .unwrap_or_else(|| PathBuf::from("."));
            let path = commands::emit(kind, input.as_deref(), cfg.as_ref(), &out)?;
            println!("{}", path.display());
            Ok(())
        }
    }
}

/// Parses `args`, runs the command and returns the process exit status.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("heatlab: {e}");
            e.exit_code()
        }
    }
}
