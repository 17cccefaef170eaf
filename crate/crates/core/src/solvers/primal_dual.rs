//! Primal-dual M-IHS: each sketched sub-problem
//! `(BᵀB + λI) Δ = c` with `B = SA` (or `SAᵀ`) is solved through its dual
//!
//! ```text
//!     (BBᵀ + λI) z = B c,   Δ = (c − Bᵀz)/λ,
//! ```
//!
//! which is itself strongly over-determined and is iterated `M` times with
//! M-IHS using a second sketch `W Bᵀ`. The inner iterate `z` is carried over
//! between outer iterations; its momentum history is not.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::primal::{dual_gradient, primal_gradient, sub_options};
use super::{heavy_ball, MomentumParams, RunOptions, RunStatus, SolveReport, SolverConfig, Tracker};
use crate::error::{check_dim, invalid, Result};
use crate::flops::{self, FlopCategory, FlopCounter};
use crate::linalg::{norm2, DenseMatrix};
use crate::problems::Problem;
use crate::rng::child_seed;
use crate::sketch::build_sketch;
use crate::subsolver::{aab_solve, AabOptions, AabStop};

/// Inner gradients growing by more than this factor over `M` steps abort
/// the run.
pub const DIVERGENCE_FACTOR: f64 = 10.0;

/// Primal-dual M-IHS for `n ≥ d`: `SA` is `m₁ × d`, `W(SA)ᵀ` is `m₂ × m₁`.
pub fn pd_m_ihs_over(problem: &Problem, cfg: &SolverConfig, opts: RunOptions<'_>) -> Result<SolveReport> {
    run(problem, cfg, opts, false)
}

/// Primal-dual M-IHS for `n ≤ d`: `SAᵀ` is `m₁ × n`, `WASᵀ` is `m₂ × m₁`;
/// returns `x = Aᵀν`.
pub fn pd_m_ihs_under(problem: &Problem, cfg: &SolverConfig, opts: RunOptions<'_>) -> Result<SolveReport> {
    run(problem, cfg, opts, true)
}

struct Inner<'a> {
    sb: &'a DenseMatrix,
    wsb: &'a DenseMatrix,
    lambda: f64,
    iters: usize,
    momentum: MomentumParams,
    sub: AabOptions,
}

struct InnerOutcome {
    delta: Vec<f64>,
    sub_iters: usize,
    growth: f64,
}

impl Inner<'_> {
    /// `M` inner M-IHS steps on `z` from its current value, then the
    /// recovered outer step `(c − Bᵀz)/λ`.
    fn run(&self, c: &[f64], z: &mut [f64], flops: &mut FlopCounter, caps: &mut usize) -> Result<InnerOutcome> {
        let (m1, k) = self.sb.shape();
        let mut z_prev = z.to_vec();
        let mut sub_iters = 0;
        let (mut first, mut last) = (0.0, 0.0);
        for j in 0..self.iters {
            // g = B(c − Bᵀz) − λz
            let mut u = self.sb.mul_t_vec(z);
            for (ui, ci) in u.iter_mut().zip(c) {
                *ui = ci - *ui;
            }
            let mut g = self.sb.mul_vec(&u);
            for (gi, zi) in g.iter_mut().zip(z.iter()) {
                *gi -= self.lambda * zi;
            }
            flops.charge(FlopCategory::MatVec, 4 * (k * m1) as u64 + 3 * m1 as u64)?;
            // divergence monitor, not part of the method's cost
            let gn = norm2(&g);
            if j == 0 {
                first = gn;
            }
            last = gn;
            let r = aab_solve(self.wsb, &g, self.lambda, self.sub, flops)?;
            if r.stop == AabStop::MaxIter {
                *caps += 1;
            }
            sub_iters += r.iters;
            heavy_ball(z, &mut z_prev, &r.x, self.momentum);
            flops.charge(FlopCategory::VectorOps, flops::momentum_update(m1))?;
        }
        let mut delta = self.sb.mul_t_vec(z);
        for (di, ci) in delta.iter_mut().zip(c) {
            *di = (ci - *di) / self.lambda;
        }
        flops.charge(FlopCategory::MatVec, 2 * (k * m1) as u64 + 2 * k as u64)?;
        let growth = if first > 0.0 { last / first } else { 0.0 };
        Ok(InnerOutcome {
            delta,
            sub_iters,
            growth,
        })
    }
}

fn run(problem: &Problem, cfg: &SolverConfig, opts: RunOptions<'_>, dual: bool) -> Result<SolveReport> {
    problem.validate()?;
    cfg.validate()?;
    let a = &problem.a;
    let (b, lambda) = (&problem.b, cfg.lambda);
    let (n, d) = a.shape();
    if !(lambda > 0.0) {
        return Err(invalid("primal-dual M-IHS needs lambda > 0"));
    }
    if cfg.inner_iters == 0 {
        return Err(invalid("primal-dual M-IHS needs at least one inner iteration"));
    }
    if let Some(r) = opts.reference {
        check_dim("reference solution", d, r.len())?;
    }
    let (m1, m2) = (cfg.m, cfg.m2());
    let mut flops = FlopCounter::new();
    let sb = if dual {
        build_sketch(cfg.sketch, d, m1, cfg.seed)?.apply(&a.transpose(), &mut flops)?
    } else {
        build_sketch(cfg.sketch, n, m1, cfg.seed)?.apply(a, &mut flops)?
    };
    let len = sb.cols();
    let w = build_sketch(cfg.sketch2.unwrap_or(cfg.sketch), len, m2, child_seed(cfg.seed, 1))?;
    let wsb = w.apply(&sb.transpose(), &mut flops)?;
    let outer = cfg.momentum.resolve(m1)?;
    let inner_m = cfg.inner_momentum.unwrap_or(cfg.momentum).resolve(m2)?;
    let inner = Inner {
        sb: &sb,
        wsb: &wsb,
        lambda,
        iters: cfg.inner_iters,
        momentum: inner_m,
        sub: sub_options(cfg),
    };

    let mut y = match (&cfg.x_init, dual) {
        (Some(x0), false) => {
            check_dim("initial iterate", d, x0.len())?;
            x0.clone()
        }
        _ => vec![0.0; len],
    };
    let mut y_prev = y.clone();
    let mut z = vec![0.0; m1];
    let residual_scale = if dual { norm2(b) } else { norm2(&a.mul_t_vec(b)) };
    let mut tracker = Tracker::new(opts, residual_scale);
    let push = |tracker: &mut Tracker<'_>, y: &[f64], flops: &FlopCounter, sub_iters: usize| {
        if dual {
            let x = opts.reference.map(|_| a.mul_t_vec(y));
            tracker.push(x.as_deref(), y, flops, sub_iters);
        } else {
            tracker.push(Some(y), y, flops, sub_iters);
        }
    };
    push(&mut tracker, &y, &flops, 0);

    let mut caps = 0;
    let mut status = RunStatus::Completed;
    for i in 0..cfg.outer_iters {
        let c = if dual {
            dual_gradient(a, b, &y, lambda, &mut flops)?
        } else {
            primal_gradient(a, b, &y, lambda, &mut flops)?
        };
        tracker.gradient(&c);
        let out = inner.run(&c, &mut z, &mut flops, &mut caps)?;
        if out.growth > DIVERGENCE_FACTOR {
            status = RunStatus::Aborted(format!(
                "inner iteration diverged at outer step {}: gradient grew {:.3e}x over {} steps",
                i + 1,
                out.growth,
                cfg.inner_iters
            ));
            break;
        }
        heavy_ball(&mut y, &mut y_prev, &out.delta, outer);
        flops.charge(FlopCategory::VectorOps, flops::momentum_update(len))?;
        push(&mut tracker, &y, &flops, out.sub_iters);
    }
    if tracker.needs_gradient() {
        let mut scratch = FlopCounter::new();
        let g = if dual {
            dual_gradient(a, b, &y, lambda, &mut scratch)?
        } else {
            primal_gradient(a, b, &y, lambda, &mut scratch)?
        };
        tracker.gradient(&g);
    }
    let (records, iterates, rate) = tracker.finish();
    let (x_final, nu_final) = if dual {
        let x = a.mul_t_vec(&y);
        flops.charge(FlopCategory::MatVec, 2 * (n * d) as u64)?;
        (x, Some(y))
    } else {
        (y, None)
    };
    Ok(SolveReport {
        x_final,
        nu_final,
        records,
        converged_rate_estimate: rate,
        flops,
        momentum: Some(outer),
        inner_momentum: Some(inner_m),
        sub_solver_caps: caps,
        status,
        iterates,
    })
}
