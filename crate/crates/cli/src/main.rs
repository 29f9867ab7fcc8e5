//! `kmfix`: run KM iterations, the verification suite, and schedule scans.
//!
//! Exit codes: 0 success, 1 check failure, 2 usage or config error,
//! 3 numerical abort.

mod config;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use kmfix::experiments::{default_suite, parse_suite, run_suite, suite_passes, Verdict, DEFAULT_SUITE_SEED};
use kmfix::iteration::{
    fixed_set, residual_monitor, run_with_fixed_set, write_trace_csv, write_vectors_json, StopReason,
};
use kmfix::operators::NonexpansiveMap;
use kmfix::schedules::{Classification, ScheduleSpec};
use kmfix::subspace::default_rank_tol;
use kmfix::Error;
use serde::Serialize;

use crate::config::{ExperimentConfig, Overrides};

#[derive(Parser)]
#[command(name = "kmfix", version, about = "Krasnoselskii–Mann iteration runner and checker")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one iteration from a config file; writes trace.csv and summary.json.
    Run(RunArgs),
    /// Run the verification suite and print one JSON report per line.
    Check(CheckArgs),
    /// Print partial sums of Σ λₙ(1 − λₙ) at N = 1, 2, 4, ... and N.
    Scan(ScanArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    record_every: Option<usize>,
}

#[derive(Args)]
struct CheckArgs {
    /// Suite config (JSON list of checks). The built-in suite runs without it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Seed for entries without their own.
    #[arg(long)]
    seed: Option<u64>,
    /// Also write the reports as JSON lines to this file.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ScanArgs {
    /// Schedule spec as inline JSON.
    #[arg(long, conflicts_with = "schedule_file", required_unless_present = "schedule_file")]
    schedule: Option<String>,
    /// Schedule spec as a JSON file.
    #[arg(long)]
    schedule_file: Option<PathBuf>,
    #[arg(long = "n")]
    n: usize,
    /// Also write the table as JSON to this file.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// An error carrying its exit code.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl Failure {
    fn config(error: impl Into<anyhow::Error>) -> Self {
        Self { code: 2, error: error.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::NumericalAbort { .. } | Error::NotConverged { .. } => 3,
            _ => 2,
        };
        Self { code, error: e.into() }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Check(a) => cmd_check(a),
        Command::Scan(a) => cmd_scan(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

#[derive(Serialize)]
struct RunSummary {
    operator: String,
    schedule: String,
    classification: Classification,
    dim: usize,
    dim_fixed: usize,
    seed: u64,
    tol: f64,
    stop_reason: StopReason,
    steps: usize,
    converged: bool,
    final_dist_to_limit: f64,
    final_dist_to_fixed_set: f64,
    initial_residual: f64,
    max_residual: f64,
    final_residual: f64,
    final_step_norm: f64,
    min_fejer_margin: Option<f64>,
    /// The run stopped short of `P_F x₀` under a summable-looking schedule
    /// and the iterate no longer moves: its limit lies outside `Fix T`.
    limit_outside_fixed_set: bool,
    trace_csv: PathBuf,
}

fn cmd_run(a: RunArgs) -> Result<u8, Failure> {
    let cfg = ExperimentConfig::load(&a.config)?;
    let overrides = Overrides { seed: a.seed, max_iters: a.max_iters, tol: a.tol, out: a.out, record_every: a.record_every };
    let exp = cfg.validate(&overrides, a.config.parent())?;

    let fixed = fixed_set(&exp.operator, default_rank_tol())?;
    let trace = run_with_fixed_set(&exp.operator, &fixed, &exp.schedule, &exp.x0, &exp.options)?;
    let classification = classify_for_scan(&exp.schedule, exp.options.max_iters.max(2))?;
    let s = &trace.summary;
    let dist_f = fixed.distance(&trace.final_x)?;
    let converged = s.final_dist_to_limit <= exp.tol;
    let summary = RunSummary {
        operator: exp.operator.describe(),
        schedule: trace.metadata.schedule.clone(),
        classification,
        dim: exp.operator.dim(),
        dim_fixed: fixed.directions().dim(),
        seed: exp.seed,
        tol: exp.tol,
        stop_reason: trace.metadata.stop_reason,
        steps: s.final_n,
        converged,
        final_dist_to_limit: s.final_dist_to_limit,
        final_dist_to_fixed_set: dist_f,
        initial_residual: s.initial_residual,
        max_residual: residual_monitor(&trace, exp.tol).max_residual,
        final_residual: s.final_residual,
        final_step_norm: s.final_step_norm,
        min_fejer_margin: s.min_fejer_margin,
        limit_outside_fixed_set: !converged
            && classification == Classification::SummableLikely
            && s.final_step_norm <= exp.tol
            && dist_f > exp.tol,
        trace_csv: exp.out.join("trace.csv"),
    };

    let write = |name: &str, f: &dyn Fn(&mut dyn std::io::Write) -> anyhow::Result<()>| {
        output::write_atomic(&exp.out.join(name), |w| f(w)).map_err(Failure::config)
    };
    write("trace.csv", &|w| Ok(write_trace_csv(&trace, w)?))?;
    write("summary.json", &|w| {
        serde_json::to_writer_pretty(&mut *w, &summary)?;
        writeln!(w)?;
        Ok(())
    })?;
    if exp.options.keep_vectors {
        write("vectors.json", &|w| Ok(write_vectors_json(&trace, w)?))?;
    }

    println!("operator:        {}", summary.operator);
    println!("schedule:        {} ({:?})", summary.schedule, summary.classification);
    println!("stop:            {:?} after {} steps", summary.stop_reason, summary.steps);
    println!("dist to P_F x0:  {:e} (tol {:e}, converged: {})", summary.final_dist_to_limit, exp.tol, converged);
    println!("dist to Fix T:   {:e}", summary.final_dist_to_fixed_set);
    println!("residual:        {:e} (initial {:e})", summary.final_residual, summary.initial_residual);
    if summary.limit_outside_fixed_set {
        println!("note:            iterate has stalled outside Fix T; the limit is not a fixed point");
    }
    println!("wrote {}", exp.out.display());
    Ok(0)
}

/// The classification `scan` and `run` report: a window of N/10 terms.
fn classify_for_scan(schedule: &kmfix::Schedule64, n: usize) -> Result<Classification, Failure> {
    let window = (n / 10).max(1);
    if n <= window {
        return Ok(schedule.declared_divergent().map_or(Classification::Indeterminate, |d| {
            if d {
                Classification::DivergentLikely
            } else {
                Classification::SummableLikely
            }
        }));
    }
    match schedule.classify(n, window) {
        Ok(c) => Ok(c),
        Err(Error::ScheduleExhausted { .. }) => Ok(Classification::Indeterminate),
        Err(e) => Err(e.into()),
    }
}

fn cmd_check(a: CheckArgs) -> Result<u8, Failure> {
    let entries = match &a.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading suite config {}", path.display()))
                .map_err(Failure::config)?;
            parse_suite(&text)?
        }
        None => default_suite(),
    };
    let reports = run_suite(&entries, a.seed.unwrap_or(DEFAULT_SUITE_SEED));
    let lines: Vec<String> =
        reports.iter().map(serde_json::to_string).collect::<Result<_, _>>().map_err(Failure::config)?;
    for line in &lines {
        println!("{line}");
    }
    if let Some(path) = &a.out {
        output::write_atomic(path, |w| {
            for line in &lines {
                writeln!(w, "{line}")?;
            }
            Ok(())
        })
        .map_err(Failure::config)?;
    }
    let count = |v: Verdict| reports.iter().filter(|r| r.verdict == v).count();
    eprintln!(
        "{} checks: {} pass, {} fail, {} indeterminate, {} error",
        reports.len(),
        count(Verdict::Pass),
        count(Verdict::Fail),
        count(Verdict::Indeterminate),
        count(Verdict::Error)
    );
    Ok(if suite_passes(&reports) { 0 } else { 1 })
}

#[derive(Serialize)]
struct ScanRow {
    n: usize,
    partial_sum: f64,
}

#[derive(Serialize)]
struct ScanTable {
    schedule: String,
    rows: Vec<ScanRow>,
    classification: Classification,
}

fn checkpoints(n: usize) -> Vec<usize> {
    let mut out: Vec<usize> = std::iter::successors(Some(1usize), |k| k.checked_mul(2)).take_while(|&k| k < n).collect();
    out.push(n);
    out
}

fn cmd_scan(a: ScanArgs) -> Result<u8, Failure> {
    if a.n == 0 {
        return Err(Failure::config(anyhow::anyhow!("--n must be at least 1")));
    }
    let (text, base): (String, Option<&Path>) = match (&a.schedule, &a.schedule_file) {
        (Some(s), _) => (s.clone(), None),
        (None, Some(p)) => (
            std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display())).map_err(Failure::config)?,
            p.parent(),
        ),
        (None, None) => unreachable!("clap requires one of --schedule and --schedule-file"),
    };
    let spec = ScheduleSpec::from_json(&text)?;
    let schedule = spec.build::<f64>(base)?;
    let points = checkpoints(a.n);
    let sums = schedule.partial_sums_at(&points)?;
    let table = ScanTable {
        schedule: schedule.describe(),
        rows: points.iter().zip(&sums).map(|(&n, &s)| ScanRow { n, partial_sum: s }).collect(),
        classification: classify_for_scan(&schedule, a.n)?,
    };
    println!("{:>12}  {}", "N", "S_N");
    for r in &table.rows {
        println!("{:>12}  {:?}", r.n, r.partial_sum);
    }
    println!("classification: {:?}", table.classification);
    if let Some(path) = &a.out {
        output::write_atomic(path, |w| {
            serde_json::to_writer_pretty(&mut *w, &table)?;
            writeln!(w)?;
            Ok(())
        })
        .map_err(Failure::config)?;
    }
    Ok(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn checkpoint_layout() {
        assert_eq!(checkpoints(1), vec![1]);
        assert_eq!(checkpoints(100), vec![1, 2, 4, 8, 16, 32, 64, 100]);
        assert_eq!(checkpoints(64), vec![1, 2, 4, 8, 16, 32, 64]);
    }

    #[test]
    fn exit_codes_by_error_kind() {
        let abort = Error::NumericalAbort { step: 3, reason: "x".into() };
        assert_eq!(Failure::from(abort).code, 3);
        assert_eq!(Failure::from(Error::NotConverged { what: "svd", iterations: 1 }).code, 3);
        assert_eq!(Failure::from(Error::DimensionMismatch { expected: 1, found: 2 }).code, 2);
        assert_eq!(Failure::from(Error::EmptyFixedSet { residual: 1.0 }).code, 2);
    }
}
