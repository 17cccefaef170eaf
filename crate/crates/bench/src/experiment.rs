//! Running configured experiments: problem preparation, solver dispatch,
//! parallel trials and CSV / JSON output.

use std::fs::{self, File};
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use mihs_core::estimate::hutchinson_sd;
use mihs_core::problems::{generate_problem_with, optimal_lambda_with, ProblemSpec, SpectralOracle};
use mihs_core::rng::child_seed;
use mihs_core::sketch::build_sketch;
use mihs_core::solvers::{
    baseline_lsqr, dual_m_ihs, m_ihs, pd_m_ihs_over, pd_m_ihs_under, MomentumParams, MomentumRule, RunOptions,
    RunStatus, Scheme, SolveReport, SolverConfig,
};
use mihs_core::{Clock, FlopCounter, Problem};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{
    ExperimentConfig, LambdaChoice, LambdaKeyword, MomentumChoice, ProblemSource, SdSource, SolverEntry, SolverName,
};
use crate::error::{config, io_err, Result};
use crate::files::read_problem;

pub const CSV_HEADER: [&str; 8] = [
    "trial",
    "iteration",
    "cumulative_flops",
    "wall_time_s",
    "rel_error_to_reference",
    "residual",
    "subsolver_iters",
    "rate_reference",
];

/// Wall clock started at construction.
#[derive(Debug, Clone, Copy)]
pub struct StdClock(Instant);

impl StdClock {
    pub fn start() -> Self {
        Self(Instant::now())
    }
}

impl Clock for StdClock {
    fn elapsed_secs(&self) -> f64 {
        self.0.elapsed().as_secs_f64()
    }
}

/// A problem with its regularization fixed and the dense-oracle quantities
/// every solver is measured against.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub problem: Problem,
    pub lambda: f64,
    pub sd: f64,
    pub reference: Vec<f64>,
    pub kappa: f64,
}

pub fn load_problem(source: &ProblemSource, seed: u64) -> Result<Problem> {
    match source {
        ProblemSource::Generate(g) => Ok(generate_problem_with(&ProblemSpec {
            n: g.n,
            d: g.d,
            profile: g.profile.clone(),
            kappa: g.kappa,
            noise_level: g.noise_level,
            signal: g.signal,
            seed: child_seed(seed, 0),
        })?),
        ProblemSource::Files(path) => read_problem(path),
    }
}

pub fn prepare(problem: Problem, lambda: LambdaChoice) -> Result<Prepared> {
    let oracle = SpectralOracle::new(&problem.a);
    let lambda = match lambda {
        LambdaChoice::Value(v) => v,
        LambdaChoice::Named(LambdaKeyword::Problem) => problem.lambda,
        LambdaChoice::Named(LambdaKeyword::Optimal) => {
            let x0 = problem
                .x_true
                .as_ref()
                .ok_or_else(|| config("lambda = \"optimal\" needs a problem with x_true"))?;
            optimal_lambda_with(&oracle, &problem.b, x0)?
        }
    };
    let problem = problem.with_lambda(lambda)?;
    let reference = oracle.ridge_solution(&problem.b, lambda)?;
    Ok(Prepared {
        sd: oracle.statistical_dimension(lambda),
        kappa: oracle.svd.condition_number(),
        reference,
        lambda,
        problem,
    })
}

/// Sizes and statistical dimension a solver entry resolved to.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Resolved {
    pub m: Option<usize>,
    pub m2: Option<usize>,
    pub sd: f64,
}

fn size(fixed: Option<usize>, factor: Option<f64>, sd: f64) -> Option<usize> {
    fixed.or_else(|| factor.map(|f| ((f * sd).ceil() as usize).max(1)))
}

/// The solver configuration an entry resolves to for one trial seed.
pub fn solver_config(prep: &Prepared, entry: &SolverEntry, seed: u64) -> Result<(SolverConfig, Resolved)> {
    let m = size(entry.m, entry.m_factor, prep.sd).ok_or_else(|| config("sketch size missing"))?;
    let m2 = size(entry.m2, entry.m2_factor, prep.sd);
    let sd = match entry.sd {
        SdSource::Exact => prep.sd,
        SdSource::Hutchinson { samples, eps_tr } => {
            let a = &prep.problem.a;
            let mut scratch = FlopCounter::new();
            let sa = if entry.name.is_dual() {
                build_sketch(entry.sketch, a.cols(), m, seed)?.apply(&a.transpose(), &mut scratch)?
            } else {
                build_sketch(entry.sketch, a.rows(), m, seed)?.apply(a, &mut scratch)?
            };
            hutchinson_sd(&sa, prep.lambda, samples, eps_tr, child_seed(seed, 2), &mut scratch)?.for_momentum()
        }
    };
    let momentum = match entry.momentum {
        MomentumChoice::Empirical => MomentumRule::Empirical { sd },
        MomentumChoice::Theoretical { eps } => MomentumRule::Theoretical { eps },
        MomentumChoice::Fixed { alpha, beta } => MomentumRule::Fixed(MomentumParams::new(alpha, beta)?),
    };
    let mut cfg = SolverConfig::new(entry.sketch, m, prep.lambda, entry.iters, momentum)
        .with_seed(seed)
        .with_eps_sub(entry.eps_sub);
    cfg.m2 = m2;
    cfg.sketch2 = entry.sketch2;
    cfg.inner_iters = entry.inner_iters;
    Ok((cfg, Resolved { m: Some(m), m2, sd }))
}

/// One run of `entry` on the prepared problem with trial seed `seed`.
pub fn run_solver(
    prep: &Prepared,
    entry: &SolverEntry,
    seed: u64,
    clock: Option<&dyn Clock>,
) -> Result<(SolveReport, Resolved)> {
    let opts = RunOptions {
        reference: Some(&prep.reference),
        clock,
        keep_iterates: false,
    };
    if entry.name == SolverName::Lsqr {
        let report = baseline_lsqr(&prep.problem, entry.iters, entry.tol, opts)?;
        let resolved = Resolved {
            m: None,
            m2: None,
            sd: prep.sd,
        };
        return Ok((report, resolved));
    }
    let (cfg, resolved) = solver_config(prep, entry, seed)?;
    let p = &prep.problem;
    let report = match entry.name {
        SolverName::MihsExact => m_ihs(p, &cfg, Scheme::Exact, opts)?,
        SolverName::MihsInexact => m_ihs(p, &cfg, Scheme::Inexact, opts)?,
        SolverName::DualMihsExact => dual_m_ihs(p, &cfg, Scheme::Exact, opts)?,
        SolverName::DualMihsInexact => dual_m_ihs(p, &cfg, Scheme::Inexact, opts)?,
        SolverName::PdMihsOver => pd_m_ihs_over(p, &cfg, opts)?,
        SolverName::PdMihsUnder => pd_m_ihs_under(p, &cfg, opts)?,
        SolverName::Lsqr => unreachable!("handled above"),
    };
    Ok((report, resolved))
}

/// Seed of trial `trial`; independent of the solver so that every solver
/// sees the same sketches in a given trial.
pub fn trial_seed(seed: u64, trial: usize) -> u64 {
    child_seed(child_seed(seed, 1), trial as u64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CsvRow {
    pub trial: usize,
    pub iteration: usize,
    pub cumulative_flops: u64,
    pub wall_time_s: Option<f64>,
    pub rel_error_to_reference: f64,
    pub residual: f64,
    pub subsolver_iters: usize,
    /// `rate^i` for the momentum the run used; empty for LSQR.
    pub rate_reference: Option<f64>,
}

pub fn csv_rows(trial: usize, report: &SolveReport, wall_time: bool) -> Vec<CsvRow> {
    let rate = report.momentum.map(|m| m.rate());
    report
        .records
        .iter()
        .map(|r| CsvRow {
            trial,
            iteration: r.iteration,
            cumulative_flops: r.flops,
            wall_time_s: wall_time.then_some(r.wall_time),
            rel_error_to_reference: r.error,
            residual: r.residual,
            subsolver_iters: r.sub_iters,
            rate_reference: rate.map(|q| q.powi(r.iteration as i32)),
        })
        .collect()
}

pub fn write_csv<W: std::io::Write>(out: W, rows: &[CsvRow]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(CSV_HEADER)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EtaEntry {
    pub eta: f64,
    /// Median cumulative flops at the first iterate with error ≤ η, over
    /// the trials that got there.
    pub median_flops: Option<f64>,
    pub reached: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbortedTrial {
    pub trial: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverSummary {
    pub label: String,
    pub solver: SolverName,
    pub csv: PathBuf,
    pub m: Option<usize>,
    pub m2: Option<usize>,
    pub sd: f64,
    pub momentum: Option<MomentumParams>,
    pub theoretical_rate: Option<f64>,
    pub median_rate_estimate: f64,
    pub median_final_error: f64,
    pub median_total_flops: f64,
    pub flops_to_eta: Vec<EtaEntry>,
    pub aborted: Vec<AbortedTrial>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSummary {
    pub n: usize,
    pub d: usize,
    pub lambda: f64,
    pub sd: f64,
    pub kappa: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub seed: u64,
    pub trials: usize,
    pub problem: ProblemSummary,
    pub solvers: Vec<SolverSummary>,
}

fn median(mut v: Vec<f64>) -> f64 {
    v.retain(|x| !x.is_nan());
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let k = v.len() / 2;
    if v.len() % 2 == 1 {
        v[k]
    } else {
        0.5 * (v[k - 1] + v[k])
    }
}

fn summarize(entry: &SolverEntry, csv: PathBuf, eta: &[f64], runs: &[(SolveReport, Resolved)]) -> SolverSummary {
    let (first, resolved) = &runs[0];
    let flops_to_eta = eta
        .iter()
        .map(|&e| {
            let hits: Vec<f64> = runs
                .iter()
                .filter_map(|(r, _)| r.records.iter().find(|rec| rec.error <= e).map(|rec| rec.flops as f64))
                .collect();
            EtaEntry {
                eta: e,
                reached: hits.len(),
                median_flops: (!hits.is_empty()).then(|| median(hits)),
            }
        })
        .collect();
    let aborted = runs
        .iter()
        .enumerate()
        .filter_map(|(trial, (r, _))| match &r.status {
            RunStatus::Aborted(reason) => Some(AbortedTrial {
                trial,
                reason: reason.clone(),
            }),
            RunStatus::Completed => None,
        })
        .collect();
    SolverSummary {
        label: entry.label(),
        solver: entry.name,
        csv,
        m: resolved.m,
        m2: resolved.m2,
        sd: median(runs.iter().map(|(_, res)| res.sd).collect()),
        momentum: first.momentum,
        theoretical_rate: first.momentum.map(|m| m.rate()),
        median_rate_estimate: median(runs.iter().map(|(r, _)| r.converged_rate_estimate).collect()),
        median_final_error: median(
            runs.iter()
                .filter_map(|(r, _)| r.records.last().map(|x| x.error))
                .collect(),
        ),
        median_total_flops: median(runs.iter().map(|(r, _)| r.flops.total() as f64).collect()),
        flops_to_eta,
        aborted,
    }
}

fn create(path: &Path) -> Result<File> {
    File::create(path).map_err(io_err(path))
}

/// Runs every `(solver, trial)` cell, writes `<label>.csv` per solver and
/// `summary.json` into `cfg.output`, and returns the summary. Output files
/// are created before any computation so an unwritable destination fails
/// fast.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentSummary> {
    cfg.validate()?;
    let out = &cfg.output;
    fs::create_dir_all(out).map_err(io_err(out))?;
    let names: Vec<PathBuf> = cfg
        .solvers
        .iter()
        .map(|s| PathBuf::from(format!("{}.csv", s.label())))
        .collect();
    let mut csv_files = names.iter().map(|n| create(&out.join(n))).collect::<Result<Vec<_>>>()?;
    let summary_path = out.join("summary.json");
    let mut summary_file = create(&summary_path)?;

    let prep = prepare(load_problem(&cfg.problem, cfg.seed)?, cfg.lambda)?;
    let cells: Vec<(usize, usize)> = (0..cfg.solvers.len())
        .flat_map(|s| (0..cfg.trials).map(move |t| (s, t)))
        .collect();
    let results: Vec<Result<(SolveReport, Resolved)>> = cells
        .par_iter()
        .map(|&(s, t)| {
            let clock = StdClock::start();
            let clock = cfg.record_wall_time.then_some(&clock as &dyn Clock);
            run_solver(&prep, &cfg.solvers[s], trial_seed(cfg.seed, t), clock)
        })
        .collect();
    let mut results = results.into_iter().collect::<Result<Vec<_>>>()?.into_iter();

    let mut solvers = Vec::with_capacity(cfg.solvers.len());
    for ((entry, name), file) in cfg.solvers.iter().zip(&names).zip(&mut csv_files) {
        let runs: Vec<(SolveReport, Resolved)> = results.by_ref().take(cfg.trials).collect();
        let rows: Vec<CsvRow> = runs
            .iter()
            .enumerate()
            .flat_map(|(t, (r, _))| csv_rows(t, r, cfg.record_wall_time))
            .collect();
        write_csv(&mut *file, &rows)?;
        solvers.push(summarize(entry, name.clone(), &cfg.eta, &runs));
    }
    let summary = ExperimentSummary {
        seed: cfg.seed,
        trials: cfg.trials,
        problem: ProblemSummary {
            n: prep.problem.n(),
            d: prep.problem.d(),
            lambda: prep.lambda,
            sd: prep.sd,
            kappa: prep.kappa,
        },
        solvers,
    };
    let mut text = serde_json::to_string_pretty(&summary).map_err(|source| crate::error::BenchError::Json {
        path: summary_path.clone(),
        source,
    })?;
    text.push('\n');
    summary_file.write_all(text.as_bytes()).map_err(io_err(&summary_path))?;
    Ok(summary)
}
