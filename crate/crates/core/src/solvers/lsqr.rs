//! Unpreconditioned damped LSQR, the Krylov baseline for benchmarks.

use alloc::vec;

use super::{RunOptions, RunStatus, SolveReport, Tracker};
use crate::error::{check_dim, invalid, Result};
use crate::flops::{FlopCategory, FlopCounter};
use crate::linalg::{axpy, norm2, scal};
use crate::math;
use crate::problems::Problem;

/// Damped LSQR on `min ‖Ax − b‖² + λ‖x‖²` (damping `√λ`), stopped after
/// `max_iter` steps or once `‖Aᵀ(b − Ax) − λx‖ ≤ tol · ‖Aᵀb‖`.
///
/// Each step charges `4nd` to [`FlopCategory::MatVec`] and `5n + 9d + 20`
/// to [`FlopCategory::VectorOps`].
pub fn baseline_lsqr(problem: &Problem, max_iter: usize, tol: f64, opts: RunOptions<'_>) -> Result<SolveReport> {
    problem.validate()?;
    if max_iter == 0 {
        return Err(invalid("LSQR needs at least one iteration"));
    }
    if !(tol >= 0.0) {
        return Err(invalid("LSQR tolerance must be >= 0"));
    }
    let a = &problem.a;
    let (n, d) = a.shape();
    if let Some(r) = opts.reference {
        check_dim("reference solution", d, r.len())?;
    }
    let damp = math::sqrt(problem.lambda);
    let mut flops = FlopCounter::new();

    let mut x = vec![0.0; d];
    let mut u = problem.b.clone();
    let mut beta = norm2(&u);
    let mut v = vec![0.0; d];
    let mut alpha = 0.0;
    if beta > 0.0 {
        scal(1.0 / beta, &mut u);
        a.mul_t_vec_into(&u, &mut v);
        alpha = norm2(&v);
    }
    if alpha > 0.0 {
        scal(1.0 / alpha, &mut v);
    }
    flops.charge(FlopCategory::MatVec, 2 * (n * d) as u64)?;
    flops.charge(FlopCategory::VectorOps, 3 * (n + d) as u64)?;
    let atb_norm = alpha * beta;
    let mut tracker = Tracker::new(opts, atb_norm);
    tracker.push(Some(&x), &x, &flops, 0);
    tracker.gradient(&[atb_norm]);

    let mut w = v.clone();
    let mut rhobar = alpha;
    let mut phibar = beta;
    let mut scratch_n = vec![0.0; n];
    let mut scratch_d = vec![0.0; d];
    if atb_norm == 0.0 {
        let (records, iterates, rate) = tracker.finish();
        return Ok(report(x, records, iterates, rate, flops));
    }
    for _ in 0..max_iter {
        // u = Av − αu
        a.mul_vec_into(&v, &mut scratch_n);
        for (s, ui) in scratch_n.iter_mut().zip(&u) {
            *s -= alpha * ui;
        }
        core::mem::swap(&mut u, &mut scratch_n);
        beta = norm2(&u);
        if beta > 0.0 {
            scal(1.0 / beta, &mut u);
        }
        // v = Aᵀu − βv
        a.mul_t_vec_into(&u, &mut scratch_d);
        for (s, vi) in scratch_d.iter_mut().zip(&v) {
            *s -= beta * vi;
        }
        core::mem::swap(&mut v, &mut scratch_d);
        alpha = norm2(&v);
        if alpha > 0.0 {
            scal(1.0 / alpha, &mut v);
        }
        flops.note_reduction();
        flops.note_reduction();

        // fold in the damping row, then the bidiagonal rotation
        let rhobar1 = math::hypot(rhobar, damp);
        let cs1 = rhobar / rhobar1;
        phibar *= cs1;
        let rho = math::hypot(rhobar1, beta);
        let cs = rhobar1 / rho;
        let sn = beta / rho;
        let theta = sn * alpha;
        rhobar = -cs * alpha;
        let phi = cs * phibar;
        phibar *= sn;
        let tau = sn * phi;

        axpy(phi / rho, &w, &mut x);
        for (wi, vi) in w.iter_mut().zip(&v) {
            *wi = vi - (theta / rho) * *wi;
        }
        flops.charge(FlopCategory::MatVec, 4 * (n * d) as u64)?;
        flops.charge(FlopCategory::VectorOps, 5 * n as u64 + 9 * d as u64 + 20)?;

        let arnorm = alpha * tau.abs();
        tracker.push(Some(&x), &x, &flops, 0);
        tracker.gradient(&[arnorm]);
        if arnorm <= tol * atb_norm || alpha == 0.0 {
            break;
        }
    }
    let (records, iterates, rate) = tracker.finish();
    Ok(report(x, records, iterates, rate, flops))
}

fn report(
    x: alloc::vec::Vec<f64>,
    records: alloc::vec::Vec<super::IterationRecord>,
    iterates: alloc::vec::Vec<alloc::vec::Vec<f64>>,
    rate: f64,
    flops: FlopCounter,
) -> SolveReport {
    SolveReport {
        x_final: x,
        nu_final: None,
        records,
        converged_rate_estimate: rate,
        flops,
        momentum: None,
        inner_momentum: None,
        sub_solver_caps: 0,
        status: RunStatus::Completed,
        iterates,
    }
}
