//! Momentum Iterative Hessian Sketch solvers.
//!
//! All variants iterate a heavy-ball update on a sketched Newton system,
//!
//! ```text
//!     x⁺ = x + α Δx + β (x − x_prev),   ((SA)ᵀSA + λI) Δx = −∇f(x)/2,
//! ```
//!
//! with the sketch drawn once. [`m_ihs`] works on `x ∈ R^d` (tall problems),
//! [`dual_m_ihs`] on the dual variable `ν ∈ R^n` (wide problems, `x = Aᵀν`),
//! and [`pd_m_ihs_over`] / [`pd_m_ihs_under`] solve each sketched sub-problem
//! through its dual with a second sketch. The first step uses no momentum
//! (`x_prev = x`).

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::clock::Clock;
use crate::error::{invalid, Result};
use crate::flops::FlopCounter;
use crate::linalg::{norm2, relative_error};
use crate::math;
use crate::sketch::SketchKind;

pub mod analysis;
mod lsqr;
mod primal;
mod primal_dual;

pub use lsqr::baseline_lsqr;
pub use primal::{dual_m_ihs, exact_sub_solve, m_ihs, ExactFactor};
pub use primal_dual::{pd_m_ihs_over, pd_m_ihs_under};

/// Heavy-ball step size `α` and momentum `β`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentumParams {
    pub alpha: f64,
    pub beta: f64,
}

impl MomentumParams {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(invalid(format!("momentum alpha must lie in (0, 1], got {alpha}")));
        }
        if !(0.0..1.0).contains(&beta) {
            return Err(invalid(format!("momentum beta must lie in [0, 1), got {beta}")));
        }
        Ok(Self { alpha, beta })
    }

    /// `√β`, the predicted per-iteration contraction.
    pub fn rate(&self) -> f64 {
        math::sqrt(self.beta)
    }
}

/// Optimal parameters for an `eps`-embedding:
/// `β = ((√(1+ε) − √(1−ε)) / (√(1+ε) + √(1−ε)))²`, `α = (1 − β)√(1 − ε²)`.
pub fn momentum_theoretical(eps: f64) -> Result<MomentumParams> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(invalid(format!("embedding eps must lie in (0, 1), got {eps}")));
    }
    let (p, q) = (math::sqrt(1.0 + eps), math::sqrt(1.0 - eps));
    let r = (p - q) / (p + q);
    let beta = r * r;
    Ok(MomentumParams {
        alpha: (1.0 - beta) * math::sqrt(1.0 - eps * eps),
        beta,
    })
}

/// Parameters from the statistical dimension: `β = sd/m`, `α = (1 − β)²`.
pub fn momentum_empirical(sd: f64, m: usize) -> Result<MomentumParams> {
    if !(sd > 0.0) || !sd.is_finite() {
        return Err(invalid(format!("statistical dimension must be positive, got {sd}")));
    }
    if sd >= m as f64 {
        return Err(invalid(format!(
            "sketch size m = {m} must exceed the statistical dimension {sd}"
        )));
    }
    let beta = sd / m as f64;
    Ok(MomentumParams {
        alpha: (1.0 - beta) * (1.0 - beta),
        beta,
    })
}

/// `ε / (1 + √(1 − ε²))`, the contraction factor of an `ε`-embedding.
pub fn theoretical_rate(eps: f64) -> f64 {
    eps / (1.0 + math::sqrt(1.0 - eps * eps))
}

/// How the constant `C` enters the iteration count.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundMode {
    /// `⌈ln η / ln ρ⌉`: error measured in the semi-norm where `C` drops out.
    #[default]
    SemiNorm,
    /// `⌈ln η · ln C / ln ρ⌉`, the product form as printed.
    LiteralProduct,
    /// `⌈(ln η − ln C) / ln ρ⌉`, reaching `η` in the ℓ2 norm.
    Quotient,
}

/// Iterations for relative error `eta` at rate `ρ = ε/(1+√(1−ε²))`,
/// never below 1.
pub fn iteration_bound(eta: f64, eps: f64, c: f64, mode: BoundMode) -> Result<usize> {
    if !(eta > 0.0 && eta < 1.0) {
        return Err(invalid(format!("eta must lie in (0, 1), got {eta}")));
    }
    if !(eps > 0.0 && eps < 0.5) {
        return Err(invalid(format!("eps must lie in (0, 1/2), got {eps}")));
    }
    if !(c >= 1.0) || !c.is_finite() {
        return Err(invalid(format!("C must be >= 1, got {c}")));
    }
    let lr = math::ln(theoretical_rate(eps));
    let n = match mode {
        BoundMode::SemiNorm => math::ln(eta) / lr,
        BoundMode::LiteralProduct => math::ln(eta) * math::ln(c) / lr,
        BoundMode::Quotient => (math::ln(eta) - math::ln(c)) / lr,
    };
    Ok((math::ceil(n) as usize).max(1))
}

/// How `(α, β)` are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MomentumRule {
    Fixed(MomentumParams),
    Theoretical { eps: f64 },
    Empirical { sd: f64 },
}

impl MomentumRule {
    /// Parameters for a sketch of size `m`.
    pub fn resolve(&self, m: usize) -> Result<MomentumParams> {
        match *self {
            MomentumRule::Fixed(p) => MomentumParams::new(p.alpha, p.beta),
            MomentumRule::Theoretical { eps } => momentum_theoretical(eps),
            MomentumRule::Empirical { sd } => momentum_empirical(sd, m),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Sub-problems solved through the R factor of `[SA; √λ I]`.
    Exact,
    /// Sub-problems solved to relative residual `eps_sub` by the Krylov
    /// sub-solver.
    #[default]
    Inexact,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub sketch: SketchKind,
    pub m: usize,
    /// Second sketch size of the primal-dual variants (defaults to `m`).
    pub m2: Option<usize>,
    /// Kind of the second sketch (defaults to `sketch`).
    pub sketch2: Option<SketchKind>,
    pub lambda: f64,
    pub outer_iters: usize,
    /// Inner iterations `M` of the primal-dual variants.
    pub inner_iters: usize,
    pub eps_sub: f64,
    /// Cap on sub-solver iterations; `None` uses the sub-solver default.
    pub sub_max_iter: Option<usize>,
    pub momentum: MomentumRule,
    /// Inner momentum of the primal-dual variants. `None` reuses `momentum`
    /// with `m2` in place of `m`.
    pub inner_momentum: Option<MomentumRule>,
    pub x_init: Option<Vec<f64>>,
    pub seed: u64,
}

impl SolverConfig {
    pub fn new(sketch: SketchKind, m: usize, lambda: f64, outer_iters: usize, momentum: MomentumRule) -> Self {
        Self {
            sketch,
            m,
            m2: None,
            sketch2: None,
            lambda,
            outer_iters,
            inner_iters: 25,
            eps_sub: 0.1,
            sub_max_iter: None,
            momentum,
            inner_momentum: None,
            x_init: None,
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_eps_sub(mut self, eps_sub: f64) -> Self {
        self.eps_sub = eps_sub;
        self
    }

    pub fn with_inner(mut self, m2: usize, inner_iters: usize) -> Self {
        self.m2 = Some(m2);
        self.inner_iters = inner_iters;
        self
    }

    pub fn m2(&self) -> usize {
        self.m2.unwrap_or(self.m)
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(invalid("sketch size m must be at least 1"));
        }
        if self.outer_iters == 0 {
            return Err(invalid("at least one outer iteration is required"));
        }
        if !(self.eps_sub > 0.0 && self.eps_sub < 1.0) {
            return Err(invalid(format!("eps_sub must lie in (0, 1), got {}", self.eps_sub)));
        }
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(invalid(format!("lambda must be finite and >= 0, got {}", self.lambda)));
        }
        Ok(())
    }
}

/// Optional instrumentation for a run.
#[derive(Default, Clone, Copy)]
pub struct RunOptions<'a> {
    /// Solution to measure errors against (in the primal variable).
    pub reference: Option<&'a [f64]>,
    pub clock: Option<&'a dyn Clock>,
    /// Keep every iterate of the iterated variable in the report.
    pub keep_iterates: bool,
}

impl core::fmt::Debug for RunOptions<'_> {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("RunOptions")
            .field("reference", &self.reference.map(|r| r.len()))
            .field("clock", &self.clock.is_some())
            .field("keep_iterates", &self.keep_iterates)
            .finish()
    }
}

impl<'a> RunOptions<'a> {
    pub fn with_reference(reference: &'a [f64]) -> Self {
        Self {
            reference: Some(reference),
            ..Self::default()
        }
    }
}

/// State of one iterate. Record 0 is the starting point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Relative ℓ2 error to the reference, or the relative gradient norm
    /// when no reference was supplied.
    pub error: f64,
    /// Relative gradient norm of the iterated objective.
    pub residual: f64,
    /// Cumulative operation count when the iterate was produced.
    pub flops: u64,
    pub wall_time: f64,
    /// Sub-solver iterations spent producing this iterate.
    pub sub_iters: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "status", content = "reason")]
pub enum RunStatus {
    Completed,
    Aborted(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub x_final: Vec<f64>,
    /// Final dual iterate for the dual variants.
    pub nu_final: Option<Vec<f64>>,
    pub records: Vec<IterationRecord>,
    /// Median ratio of consecutive errors over the final third of the run.
    pub converged_rate_estimate: f64,
    pub flops: FlopCounter,
    pub momentum: Option<MomentumParams>,
    pub inner_momentum: Option<MomentumParams>,
    /// Sub-solves that stopped at their iteration cap.
    pub sub_solver_caps: usize,
    pub status: RunStatus,
    pub iterates: Vec<Vec<f64>>,
}

impl SolveReport {
    pub fn errors(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.error).collect()
    }

    pub fn is_aborted(&self) -> bool {
        matches!(self.status, RunStatus::Aborted(_))
    }
}

/// Median of `e[k]/e[k−1]` over the last third of the sequence.
pub fn rate_estimate(errors: &[f64]) -> f64 {
    let n = errors.len();
    if n < 2 {
        return f64::NAN;
    }
    let steps = n - 1;
    let take = steps.div_ceil(3).max(1);
    let mut ratios: Vec<f64> = (n - take..n)
        .filter(|&k| errors[k - 1] > 0.0 && errors[k].is_finite())
        .map(|k| errors[k] / errors[k - 1])
        .collect();
    math::median(&mut ratios)
}

/// Median of `e[k]/e[k−1]` for `k` in `from..=to` (clamped to the data).
pub fn median_ratio(errors: &[f64], from: usize, to: usize) -> f64 {
    let to = to.min(errors.len().saturating_sub(1));
    let mut ratios: Vec<f64> = (from.max(1)..=to)
        .filter(|&k| errors[k - 1] > 0.0)
        .map(|k| errors[k] / errors[k - 1])
        .collect();
    math::median(&mut ratios)
}

/// Collects records while a solver runs. Residuals of an iterate become known
/// when the next gradient is formed, so they are filled in one step late.
pub(crate) struct Tracker<'a> {
    opts: RunOptions<'a>,
    records: Vec<IterationRecord>,
    iterates: Vec<Vec<f64>>,
    residual_scale: f64,
}

impl<'a> Tracker<'a> {
    pub fn new(opts: RunOptions<'a>, residual_scale: f64) -> Self {
        Self {
            opts,
            records: Vec::new(),
            iterates: Vec::new(),
            residual_scale: if residual_scale > 0.0 { residual_scale } else { 1.0 },
        }
    }

    /// Records a new iterate. `primal` is the iterate in `x` space (used for
    /// the reference error), `raw` the iterated variable.
    pub fn push(&mut self, primal: Option<&[f64]>, raw: &[f64], flops: &FlopCounter, sub_iters: usize) {
        let error = match (self.opts.reference, primal) {
            (Some(r), Some(x)) => relative_error(x, r),
            _ => f64::NAN,
        };
        self.records.push(IterationRecord {
            iteration: self.records.len(),
            error,
            residual: f64::NAN,
            flops: flops.total(),
            wall_time: self.opts.clock.map_or(0.0, |c| c.elapsed_secs()),
            sub_iters,
        });
        if self.opts.keep_iterates {
            self.iterates.push(raw.to_vec());
        }
    }

    /// Supplies the gradient of the most recent iterate.
    pub fn gradient(&mut self, g: &[f64]) {
        if let Some(last) = self.records.last_mut() {
            if last.residual.is_nan() {
                last.residual = norm2(g) / self.residual_scale;
            }
        }
    }

    pub fn needs_gradient(&self) -> bool {
        self.records.last().is_some_and(|r| r.residual.is_nan())
    }

    pub fn finish(mut self) -> (Vec<IterationRecord>, Vec<Vec<f64>>, f64) {
        if self.opts.reference.is_none() {
            for r in &mut self.records {
                r.error = r.residual;
            }
        }
        let errors: Vec<f64> = self.records.iter().map(|r| r.error).collect();
        let rate = rate_estimate(&errors);
        (self.records, self.iterates, rate)
    }
}

/// `x + αΔ + β(x − x_prev)` in place; `x_prev` takes the old `x`.
pub(crate) fn heavy_ball(x: &mut [f64], x_prev: &mut [f64], delta: &[f64], p: MomentumParams) {
    for ((xi, pi), di) in x.iter_mut().zip(x_prev.iter_mut()).zip(delta) {
        let old = *xi;
        *xi = old + p.alpha * di + p.beta * (old - *pi);
        *pi = old;
    }
}
