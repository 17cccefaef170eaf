//! The `mihs` command line.
//!
//! Exit codes: 0 on success, 1 on usage errors (unknown flags, solvers or
//! malformed values), 2 when the command itself fails.

use std::ffi::OsString;
use std::io::Write as _;
use std::path::PathBuf;

use anyhow::Context as _;
use clap::{Args, Parser, Subcommand, ValueEnum};
use mihs_core::estimate::{hutchinson_sd, sd_exact};
use mihs_core::linalg::compact_svd;
use mihs_core::rng::child_seed;
use mihs_core::sketch::build_sketch;
use mihs_core::solvers::RunStatus;
use mihs_core::{FlopCounter, SketchKind};
use serde::Serialize;

use crate::config::{ExperimentConfig, GenerateSpec, LambdaChoice, LambdaKeyword, SolverEntry, SolverName};
use crate::experiment::{csv_rows, load_problem, prepare, run_experiment, run_solver, write_csv, StdClock};
use crate::files::{read_json, read_problem, write_problem, write_sketched, SketchSidecar};

#[derive(Debug, Parser)]
#[command(name = "mihs", version, about = "Sketched solvers for regularized least squares")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic problem and write it as Matrix Market files.
    Gen(GenArgs),
    /// Run one solver on a problem and print a JSON summary.
    Solve(SolveArgs),
    /// Run an experiment config (CSV per solver plus summary.json).
    Bench(BenchArgs),
    /// Hutchinson estimate of the statistical dimension from a sketch.
    EstimateSd(EstimateArgs),
    /// Sketch a problem matrix and write SA to disk.
    Sketch(SketchArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

fn parse_sketch(s: &str) -> Result<SketchKind, String> {
    let lower = s.to_ascii_lowercase().replace('-', "_");
    match lower.as_str() {
        "gaussian" => Ok(SketchKind::Gaussian),
        "count_sketch" | "countsketch" => Ok(SketchKind::CountSketch),
        "srht" => Ok(SketchKind::Srht),
        "identity" => Ok(SketchKind::Identity),
        _ => match lower.strip_prefix("osnap") {
            Some("") => Ok(SketchKind::Osnap { s: 2 }),
            Some(rest) => rest
                .strip_prefix(':')
                .and_then(|k| k.parse().ok())
                .map(|s| SketchKind::Osnap { s })
                .ok_or_else(|| format!("bad OSNAP sparsity in `{s}`, expected e.g. osnap:4")),
            None => Err(format!(
                "unknown sketch `{s}` (gaussian, count-sketch, srht, osnap[:s], identity)"
            )),
        },
    }
}

#[derive(Debug, Args)]
pub struct GenArgs {
    /// JSON problem spec: n, d, kappa, and optionally profile, noise_level, signal.
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Regularization stored with the problem.
    #[arg(long, default_value = "optimal")]
    pub lambda: LambdaChoice,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    /// Problem sidecar (problem.json) or the directory holding it.
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, value_enum)]
    pub solver: SolverName,
    /// Sketch size; defaults to ⌈2·sd⌉.
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long, default_value = "problem")]
    pub lambda: LambdaChoice,
    #[arg(long, default_value_t = 30)]
    pub iters: usize,
    #[arg(long, default_value_t = 0.1)]
    pub eps_sub: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_parser = parse_sketch, default_value = "gaussian")]
    pub sketch: SketchKind,
    /// Also write the iteration records and summary into this directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Experiment config (JSON).
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides the config's output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    /// Problem sidecar (problem.json) or the directory holding it.
    #[arg(long)]
    pub config: PathBuf,
    /// Sketch size; defaults to min(n, 2d).
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long, default_value_t = 2)]
    pub samples: usize,
    #[arg(long, default_value_t = 0.5)]
    pub eps_tr: f64,
    #[arg(long, default_value = "problem")]
    pub lambda: LambdaChoice,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_parser = parse_sketch, default_value = "gaussian")]
    pub sketch: SketchKind,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct SketchArgs {
    /// Problem sidecar (problem.json) or the directory holding it.
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub m: usize,
    #[arg(long, value_parser = parse_sketch, default_value = "gaussian")]
    pub sketch: SketchKind,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Sketch Aᵀ instead of A.
    #[arg(long)]
    pub transpose: bool,
    #[arg(long)]
    pub out: PathBuf,
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
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
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            2
        }
    }
}

fn execute(cmd: Command) -> anyhow::Result<()> {
    match cmd {
        Command::Gen(a) => gen(a),
        Command::Solve(a) => solve(a),
        Command::Bench(a) => bench(a),
        Command::EstimateSd(a) => estimate(a),
        Command::Sketch(a) => sketch(a),
    }
}

fn print_json<T: Serialize>(value: &T) -> anyhow::Result<()> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

fn gen(a: GenArgs) -> anyhow::Result<()> {
    let spec: GenerateSpec = read_json(&a.config)?;
    let problem = load_problem(&crate::config::ProblemSource::Generate(spec), a.seed)?;
    let prep = prepare(problem, a.lambda)?;
    let path = write_problem(&a.out, &prep.problem)?;
    println!("{}", path.display());
    Ok(())
}

#[derive(Debug, Serialize)]
struct SolveSummary {
    solver: SolverName,
    n: usize,
    d: usize,
    lambda: f64,
    sd: f64,
    m: Option<usize>,
    iterations: usize,
    final_relative_residual: f64,
    final_rel_error_to_reference: f64,
    total_flops: u64,
    status: RunStatus,
}

fn solve(a: SolveArgs) -> anyhow::Result<()> {
    let problem = read_problem(&a.config)?;
    let prep = prepare(problem, a.lambda)?;
    let entry = SolverEntry {
        sketch: a.sketch,
        m: a.m,
        m_factor: a.m.is_none().then_some(2.0),
        iters: a.iters,
        eps_sub: a.eps_sub,
        ..SolverEntry::new(a.solver)
    };
    let clock = StdClock::start();
    let (report, resolved) = run_solver(&prep, &entry, a.seed, Some(&clock))?;
    let last = report.records.last().context("solver produced no records")?;
    let summary = SolveSummary {
        solver: a.solver,
        n: prep.problem.n(),
        d: prep.problem.d(),
        lambda: prep.lambda,
        sd: resolved.sd,
        m: resolved.m,
        iterations: last.iteration,
        final_relative_residual: last.residual,
        final_rel_error_to_reference: last.error,
        total_flops: report.flops.total(),
        status: report.status.clone(),
    };
    let rows = csv_rows(0, &report, true);
    if let Some(dir) = &a.out {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let path = dir.join("records.csv");
        let file = std::fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        write_csv(file, &rows)?;
        crate::files::write_json(&dir.join("summary.json"), &summary)?;
    }
    match a.format {
        Format::Json => print_json(&summary),
        Format::Csv => Ok(write_csv(std::io::stdout().lock(), &rows)?),
    }
}

fn bench(a: BenchArgs) -> anyhow::Result<()> {
    let mut cfg = ExperimentConfig::load(&a.config)?;
    if let Some(t) = a.trials {
        cfg.trials = t;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(out) = a.out {
        cfg.output = out;
    }
    let summary = run_experiment(&cfg)?;
    for s in &summary.solvers {
        println!(
            "{:<24} trials {:>3}  median rate {:.4}  median final error {:.3e}  -> {}",
            s.label,
            summary.trials,
            s.median_rate_estimate,
            s.median_final_error,
            cfg.output.join(&s.csv).display()
        );
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct SdSummary {
    value: f64,
    raw: f64,
    samples: usize,
    eps_tr: f64,
    m: usize,
    d: usize,
    lambda: f64,
    /// `sd_λ(SA)` from the SVD of the sketched matrix.
    sketched_exact: f64,
}

fn estimate(a: EstimateArgs) -> anyhow::Result<()> {
    let problem = read_problem(&a.config)?;
    let lambda = match a.lambda {
        LambdaChoice::Value(v) => v,
        LambdaChoice::Named(LambdaKeyword::Problem) => problem.lambda,
        LambdaChoice::Named(LambdaKeyword::Optimal) => prepare(problem.clone(), a.lambda)?.lambda,
    };
    let (n, d) = problem.a.shape();
    let m = a.m.unwrap_or(n.min(2 * d));
    let mut flops = FlopCounter::new();
    let sa = build_sketch(a.sketch, n, m, a.seed)?.apply(&problem.a, &mut flops)?;
    let est = hutchinson_sd(&sa, lambda, a.samples, a.eps_tr, child_seed(a.seed, 2), &mut flops)?;
    let summary = SdSummary {
        value: est.for_momentum(),
        raw: est.raw,
        samples: a.samples,
        eps_tr: a.eps_tr,
        m,
        d,
        lambda,
        sketched_exact: sd_exact(&compact_svd(&sa).singular_values, lambda),
    };
    match a.format {
        Format::Json => print_json(&summary),
        Format::Csv => {
            println!("value,raw,samples,eps_tr,m,d,lambda,sketched_exact");
            println!(
                "{},{},{},{},{},{},{},{}",
                summary.value, summary.raw, a.samples, a.eps_tr, m, d, lambda, summary.sketched_exact
            );
            Ok(())
        }
    }
}

fn sketch(a: SketchArgs) -> anyhow::Result<()> {
    let problem = read_problem(&a.config)?;
    let target = if a.transpose { problem.a.transpose() } else { problem.a };
    let op = build_sketch(a.sketch, target.rows(), a.m, a.seed)?;
    let sa = op.apply(&target, &mut FlopCounter::new())?;
    let side = SketchSidecar {
        kind: a.sketch,
        m: a.m,
        n: target.rows(),
        seed: a.seed,
        matrix: "SA.mtx".into(),
    };
    let path = write_sketched(&a.out, &sa, &side)?;
    println!("{}", path.display());
    Ok(())
}
