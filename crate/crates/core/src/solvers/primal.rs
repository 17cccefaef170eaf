//! Primal and dual M-IHS.

use alloc::vec;
use alloc::vec::Vec;

use super::{RunOptions, RunStatus, Scheme, SolveReport, SolverConfig, Tracker};
use crate::error::{check_dim, invalid, Error, Result};
use crate::flops::{self, FlopCategory, FlopCounter};
use crate::linalg::{norm2, qr_r_factor, solve_upper, solve_upper_transpose, DenseMatrix};
use crate::math;
use crate::problems::Problem;
use crate::sketch::build_sketch;
use crate::subsolver::{aab_solve, AabOptions, AabStop};

/// Cholesky-like factor `R` of `(SA)ᵀSA + λI`, from the QR decomposition of
/// `[SA; √λ I]`. Computed once per run.
#[derive(Debug, Clone)]
pub struct ExactFactor {
    r: DenseMatrix,
}

impl ExactFactor {
    pub fn new(sa: &DenseMatrix, lambda: f64, flops: &mut FlopCounter) -> Result<Self> {
        let d = sa.cols();
        let stacked = if lambda > 0.0 {
            let mut reg = DenseMatrix::identity(d);
            reg.scale(math::sqrt(lambda));
            sa.vstack(&reg)
        } else {
            sa.clone()
        };
        if stacked.rows() < d {
            return Err(Error::Singular(alloc::format!(
                "sketched matrix has {} rows for {d} unknowns; use lambda > 0",
                stacked.rows()
            )));
        }
        let r = qr_r_factor(&stacked)?;
        flops.charge(FlopCategory::Factorization, flops::householder_r(stacked.rows(), d))?;
        let diag: Vec<f64> = (0..d).map(|i| r[(i, i)]).collect();
        let top = diag.iter().copied().fold(0.0, f64::max);
        if diag.iter().any(|&v| v <= 1e-14 * top) || top == 0.0 {
            return Err(Error::Singular(
                "sketched matrix is rank deficient; use lambda > 0".into(),
            ));
        }
        Ok(Self { r })
    }

    pub fn r(&self) -> &DenseMatrix {
        &self.r
    }

    /// `((SA)ᵀSA + λI)⁻¹ rhs` by two triangular solves.
    pub fn solve(&self, rhs: &[f64], flops: &mut FlopCounter) -> Result<Vec<f64>> {
        let d = self.r.cols() as u64;
        let mut y = rhs.to_vec();
        solve_upper_transpose(&self.r, &mut y)?;
        solve_upper(&self.r, &mut y)?;
        flops.charge(FlopCategory::Subsolver, 2 * d * d)?;
        Ok(y)
    }
}

/// Minimizer of `‖SAx‖² + λ‖x‖² + 2⟨g, x⟩`, i.e. the solution of
/// `((SA)ᵀSA + λI) x = −g`.
pub fn exact_sub_solve(sa: &DenseMatrix, g: &[f64], lambda: f64) -> Result<Vec<f64>> {
    if sa.rows() == 0 {
        return Err(invalid("sketched matrix needs at least one row"));
    }
    check_dim("sub-problem gradient", sa.cols(), g.len())?;
    let mut scratch = FlopCounter::new();
    let f = ExactFactor::new(sa, lambda, &mut scratch)?;
    let neg: Vec<f64> = g.iter().map(|v| -v).collect();
    f.solve(&neg, &mut scratch)
}

/// M-IHS on `x ∈ R^d`, intended for `n ≥ d`.
pub fn m_ihs(problem: &Problem, cfg: &SolverConfig, scheme: Scheme, opts: RunOptions<'_>) -> Result<SolveReport> {
    run(problem, cfg, scheme, opts, false)
}

/// Dual M-IHS on `ν ∈ R^n`, intended for `n ≤ d`; returns `x = Aᵀν`.
pub fn dual_m_ihs(problem: &Problem, cfg: &SolverConfig, scheme: Scheme, opts: RunOptions<'_>) -> Result<SolveReport> {
    run(problem, cfg, scheme, opts, true)
}

pub(super) enum SubSolve<'a> {
    Exact(ExactFactor),
    Inexact { sb: &'a DenseMatrix, opts: AabOptions },
}

impl SubSolve<'_> {
    /// Returns the step and the sub-solver iteration count; `capped` is set
    /// when the Krylov solve hit its iteration limit.
    pub(super) fn solve(
        &self,
        rhs: &[f64],
        lambda: f64,
        flops: &mut FlopCounter,
        capped: &mut usize,
    ) -> Result<(Vec<f64>, usize)> {
        match self {
            SubSolve::Exact(f) => Ok((f.solve(rhs, flops)?, 0)),
            SubSolve::Inexact { sb, opts } => {
                let r = aab_solve(*sb, rhs, lambda, *opts, flops)?;
                if r.stop == AabStop::MaxIter {
                    *capped += 1;
                }
                Ok((r.x, r.iters))
            }
        }
    }
}

pub(super) fn sub_options(cfg: &SolverConfig) -> AabOptions {
    AabOptions {
        eps: cfg.eps_sub,
        max_iter: cfg.sub_max_iter,
        kappa_est: None,
    }
}

/// `g = Aᵀ(b − Ax) − λx`.
pub(super) fn primal_gradient(
    a: &DenseMatrix,
    b: &[f64],
    x: &[f64],
    lambda: f64,
    flops: &mut FlopCounter,
) -> Result<Vec<f64>> {
    let mut r = a.mul_vec(x);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    let mut g = a.mul_t_vec(&r);
    for (gi, xi) in g.iter_mut().zip(x) {
        *gi -= lambda * xi;
    }
    flops.charge(FlopCategory::MatVec, flops::primal_gradient(a.rows(), a.cols()))?;
    Ok(g)
}

/// `g = b − AAᵀν − λν`.
pub(super) fn dual_gradient(
    a: &DenseMatrix,
    b: &[f64],
    nu: &[f64],
    lambda: f64,
    flops: &mut FlopCounter,
) -> Result<Vec<f64>> {
    let atnu = a.mul_t_vec(nu);
    let mut g = a.mul_vec(&atnu);
    for ((gi, bi), vi) in g.iter_mut().zip(b).zip(nu) {
        *gi = bi - *gi - lambda * vi;
    }
    flops.charge(FlopCategory::MatVec, flops::dual_gradient(a.rows(), a.cols()))?;
    Ok(g)
}

fn run(problem: &Problem, cfg: &SolverConfig, scheme: Scheme, opts: RunOptions<'_>, dual: bool) -> Result<SolveReport> {
    problem.validate()?;
    cfg.validate()?;
    let a = &problem.a;
    let (b, lambda) = (&problem.b, cfg.lambda);
    let (n, d) = a.shape();
    if dual && !(lambda > 0.0) {
        return Err(invalid("dual M-IHS needs lambda > 0"));
    }
    if let Some(r) = opts.reference {
        check_dim("reference solution", d, r.len())?;
    }
    let mut flops = FlopCounter::new();
    let sb = if dual {
        build_sketch(cfg.sketch, d, cfg.m, cfg.seed)?.apply(&a.transpose(), &mut flops)?
    } else {
        build_sketch(cfg.sketch, n, cfg.m, cfg.seed)?.apply(a, &mut flops)?
    };
    let momentum = cfg.momentum.resolve(cfg.m)?;
    let sub = match scheme {
        Scheme::Exact => SubSolve::Exact(ExactFactor::new(&sb, lambda, &mut flops)?),
        Scheme::Inexact => SubSolve::Inexact {
            sb: &sb,
            opts: sub_options(cfg),
        },
    };

    let len = if dual { n } else { d };
    let mut y = match (&cfg.x_init, dual) {
        (Some(x0), false) => {
            check_dim("initial iterate", d, x0.len())?;
            x0.clone()
        }
        _ => vec![0.0; len],
    };
    let mut y_prev = y.clone();
    let residual_scale = if dual { norm2(b) } else { norm2(&a.mul_t_vec(b)) };
    let mut tracker = Tracker::new(opts, residual_scale);
    let primal_view = |y: &[f64]| -> Option<Vec<f64>> {
        if dual {
            opts.reference.map(|_| a.mul_t_vec(y))
        } else {
            None
        }
    };
    let push = |tracker: &mut Tracker<'_>, y: &[f64], flops: &FlopCounter, sub_iters: usize| {
        if dual {
            let x = primal_view(y);
            tracker.push(x.as_deref(), y, flops, sub_iters);
        } else {
            tracker.push(Some(y), y, flops, sub_iters);
        }
    };
    push(&mut tracker, &y, &flops, 0);

    let mut caps = 0;
    for _ in 0..cfg.outer_iters {
        let g = if dual {
            dual_gradient(a, b, &y, lambda, &mut flops)?
        } else {
            primal_gradient(a, b, &y, lambda, &mut flops)?
        };
        tracker.gradient(&g);
        let (delta, sub_iters) = sub.solve(&g, lambda, &mut flops, &mut caps)?;
        super::heavy_ball(&mut y, &mut y_prev, &delta, momentum);
        flops.charge(FlopCategory::VectorOps, flops::momentum_update(len))?;
        push(&mut tracker, &y, &flops, sub_iters);
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
        momentum: Some(momentum),
        inner_momentum: None,
        sub_solver_caps: caps,
        status: RunStatus::Completed,
        iterates,
    })
}
