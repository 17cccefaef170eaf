//! Krylov solver for shifted normal equations `(AᵀA + λI) x = b`.
//!
//! Upper (bidiag2) Golub–Kahan bidiagonalization started from `θ₁v¹ = b`, so
//! `span{v¹..vᵏ}` is the Krylov space of `AᵀA` (and of every shift of it).
//! The `√λ` rows are folded into the bidiagonal factor by one Givens rotation
//! per step; the right-hand side `R̄ₖ⁻ᵀe₁` has a closed form, and the iterate
//! is updated by forward substitution. No basis is stored and nothing is
//! reorthogonalized.
//!
//! The residual of `xᵏ` is `|φₖ θ̄ₖ₊₁| = |φₖ₊₁ ρ̄ₖ₊₁|`, so it is known only
//! once step `k+1` has run. [`aab_solve`] tests `t = |φₖ₊₁ ρ̄ₖ₊₁|/θ₁` after
//! each full step and returns `xᵏ⁺¹`; the reported `relres` therefore
//! belongs to the previous iterate. [`AabState::probe`] gives the residual
//! of the current iterate for callers that need it exactly.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{check_dim, invalid, Result};
use crate::flops::{FlopCategory, FlopCounter};
use crate::linalg::{axpy, norm2, LinearOperator};
use crate::math;

/// A normalizer below this fraction of the largest one seen so far is zero.
pub const BREAKDOWN_RATIO: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AabOptions {
    /// Relative residual target `‖(AᵀA+λI)x − b‖ / ‖b‖`.
    pub eps: f64,
    /// Cap on the number of Krylov vectors; see [`default_max_iter`].
    pub max_iter: Option<usize>,
    /// Optional estimate of `κ(AᵀA+λI)` used to tighten the default cap.
    pub kappa_est: Option<f64>,
}

impl AabOptions {
    pub fn new(eps: f64) -> Self {
        Self {
            eps,
            max_iter: None,
            kappa_est: None,
        }
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = Some(max_iter);
        self
    }
}

/// `min(rows, cols)`, further capped by `2⌈√κ · ln(1/eps)⌉` when a condition
/// estimate is supplied. Never below 1.
pub fn default_max_iter(rows: usize, cols: usize, eps: f64, kappa_est: Option<f64>) -> usize {
    let mut cap = rows.min(cols);
    if let Some(kappa) = kappa_est {
        if kappa >= 1.0 && eps > 0.0 && eps < 1.0 {
            let k = 2.0 * math::ceil(math::sqrt(kappa) * math::ln(1.0 / eps));
            if k < cap as f64 {
                cap = k as usize;
            }
        }
    }
    cap.max(1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AabStop {
    /// Residual target met.
    Converged,
    /// The Krylov space became invariant; `x` is exact for the projected
    /// system.
    Breakdown,
    /// Iteration cap hit before the target.
    MaxIter,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AabResult {
    pub x: Vec<f64>,
    /// Number of Krylov vectors generated.
    pub iters: usize,
    /// Last value of the stopping quantity `t`: the recurrence residual of
    /// the iterate before `x` (of `x` itself after a breakdown).
    pub relres: f64,
    pub stop: AabStop,
}

impl AabResult {
    pub fn converged(&self) -> bool {
        self.stop != AabStop::MaxIter
    }
}

/// Iteration state of the solver, exposed so tests and diagnostics can step
/// through the recurrence.
#[derive(Debug, Clone)]
pub struct AabState<'a, A: LinearOperator + ?Sized> {
    op: &'a A,
    lambda: f64,
    v: Vec<f64>,
    p: Vec<f64>,
    d: Vec<f64>,
    x: Vec<f64>,
    scratch_n: Vec<f64>,
    scratch_m: Vec<f64>,
    rho: f64,
    /// `θₖ₊₁` once probed.
    theta: f64,
    rho_bar: f64,
    c: f64,
    s: f64,
    phi: f64,
    theta1: f64,
    largest: f64,
    iter: usize,
    relres: f64,
    probed: bool,
    exhausted: bool,
}

impl<'a, A: LinearOperator + ?Sized> AabState<'a, A> {
    /// Lines `θ₁v = b`, `ρp = Av` and the first rotation.
    pub fn new(op: &'a A, b: &[f64], lambda: f64, flops: &mut FlopCounter) -> Result<Self> {
        let (m, n) = (op.nrows(), op.ncols());
        check_dim("sub-solver right-hand side", n, b.len())?;
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(invalid("regularization lambda must be a finite value >= 0"));
        }
        let mut st = Self {
            op,
            lambda,
            v: b.to_vec(),
            p: vec![0.0; m],
            d: vec![0.0; n],
            x: vec![0.0; n],
            scratch_n: vec![0.0; n],
            scratch_m: vec![0.0; m],
            rho: 0.0,
            theta: 0.0,
            rho_bar: 0.0,
            c: 0.0,
            s: 0.0,
            phi: 0.0,
            theta1: 0.0,
            largest: 0.0,
            iter: 0,
            relres: 0.0,
            probed: false,
            exhausted: false,
        };
        let theta1 = norm2(&st.v);
        flops.note_reduction();
        flops.charge(FlopCategory::Subsolver, 3 * n as u64)?;
        if theta1 == 0.0 {
            st.exhausted = true;
            return Ok(st);
        }
        st.theta1 = theta1;
        scale_by(1.0 / theta1, &mut st.v);

        op.apply(&st.v, &mut st.p);
        let rho = norm2(&st.p);
        flops.note_reduction();
        flops.charge(FlopCategory::Subsolver, 2 * (m * n) as u64 + 3 * m as u64)?;
        st.iter = 1;
        st.largest = rho;
        st.relres = 1.0;
        if rho == 0.0 && lambda == 0.0 {
            // b is orthogonal to the range of Aᵀ: nothing to do with λ = 0
            st.exhausted = true;
            return Ok(st);
        }
        if rho > 0.0 {
            scale_by(1.0 / rho, &mut st.p);
        }
        st.rho = rho;
        st.rho_bar = math::sqrt(rho * rho + lambda);
        st.c = rho / st.rho_bar;
        st.s = math::sqrt(lambda) / st.rho_bar;
        st.phi = theta1 / st.rho_bar;
        for (d, v) in st.d.iter_mut().zip(&st.v) {
            *d = v / st.rho_bar;
        }
        for (x, d) in st.x.iter_mut().zip(&st.d) {
            *x = st.phi * d;
        }
        flops.charge(FlopCategory::Subsolver, 2 * n as u64 + 6)?;
        if rho == 0.0 {
            // Av = 0 makes span{v} invariant; x = b/λ is exact
            st.relres = 0.0;
            st.exhausted = true;
        }
        Ok(st)
    }

    /// First half of a step: `θv := Aᵀp − ρv`. Returns the relative residual
    /// of the current iterate, `|φ c θ| / θ₁`. Idempotent.
    pub fn probe(&mut self, flops: &mut FlopCounter) -> Result<f64> {
        if self.exhausted || self.probed {
            return Ok(self.relres);
        }
        let (m, n) = (self.op.nrows(), self.op.ncols());
        self.op.apply_t(&self.p, &mut self.scratch_n);
        for (w, v) in self.scratch_n.iter_mut().zip(&self.v) {
            *w -= self.rho * v;
        }
        let theta = norm2(&self.scratch_n);
        flops.note_reduction();
        flops.charge(FlopCategory::Subsolver, 2 * (m * n) as u64 + 5 * n as u64 + 3)?;
        self.probed = true;
        self.theta = theta;
        self.relres = (self.phi * self.c * theta).abs() / self.theta1;
        if theta <= BREAKDOWN_RATIO * self.largest {
            // AᵀA maps the current space into itself
            self.exhausted = true;
            return Ok(self.relres);
        }
        self.largest = self.largest.max(theta);
        core::mem::swap(&mut self.v, &mut self.scratch_n);
        scale_by(1.0 / theta, &mut self.v);
        Ok(self.relres)
    }

    /// Second half: `ρp := Av − θp`, the rotation, and the `d`, `φ`, `x`
    /// updates. Probes first if needed.
    pub fn advance(&mut self, flops: &mut FlopCounter) -> Result<()> {
        self.probe(flops)?;
        if self.exhausted {
            return Ok(());
        }
        let (m, n) = (self.op.nrows(), self.op.ncols());
        let theta = self.theta;
        self.op.apply(&self.v, &mut self.scratch_m);
        for (q, p) in self.scratch_m.iter_mut().zip(&self.p) {
            *q -= theta * p;
        }
        let rho = norm2(&self.scratch_m);
        flops.note_reduction();
        flops.charge(FlopCategory::Subsolver, 2 * (m * n) as u64 + 5 * m as u64)?;

        let lambda_bar_sq = self.lambda + (self.s * theta) * (self.s * theta);
        let theta_bar = self.c * theta;
        let rho_is_zero = rho <= BREAKDOWN_RATIO * self.largest;
        let rho = if rho_is_zero { 0.0 } else { rho };
        let rho_bar = math::sqrt(rho * rho + lambda_bar_sq);
        if rho_bar == 0.0 {
            // λ = 0 and a singular projected system: keep xᵏ
            self.probed = false;
            self.exhausted = true;
            return Ok(());
        }
        self.c = rho / rho_bar;
        self.s = math::sqrt(lambda_bar_sq) / rho_bar;
        self.rho = rho;
        self.rho_bar = rho_bar;
        for (d, v) in self.d.iter_mut().zip(&self.v) {
            *d = (v - theta_bar * *d) / rho_bar;
        }
        self.phi = -self.phi * theta_bar / rho_bar;
        axpy(self.phi, &self.d, &mut self.x);
        flops.charge(FlopCategory::Subsolver, 3 * m as u64 + 2 * n as u64 + 12)?;
        self.iter += 1;
        self.probed = false;
        if rho_is_zero {
            // Av = θp keeps the space invariant, so the new iterate is exact
            self.relres = 0.0;
            self.exhausted = true;
        } else {
            self.largest = self.largest.max(rho);
            swap_scaled(&mut self.p, &mut self.scratch_m, 1.0 / rho);
            // residual of the new iterate is known only after the next probe
            self.relres = (self.phi * rho_bar).abs() / self.theta1;
        }
        Ok(())
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    /// Latest Krylov vector `vᵏ` (or `vᵏ⁺¹` after a probe).
    pub fn v(&self) -> &[f64] {
        &self.v
    }

    pub fn iter(&self) -> usize {
        self.iter
    }

    pub fn relres(&self) -> f64 {
        self.relres
    }

    /// True once the Krylov space is invariant (or `b = 0`).
    pub fn exhausted(&self) -> bool {
        self.exhausted
    }

    pub fn into_x(self) -> Vec<f64> {
        self.x
    }
}

fn scale_by(alpha: f64, x: &mut [f64]) {
    for v in x {
        *v *= alpha;
    }
}

fn swap_scaled(dst: &mut Vec<f64>, src: &mut Vec<f64>, alpha: f64) {
    core::mem::swap(dst, src);
    scale_by(alpha, dst);
}

/// Solves `(AᵀA + λI) x = b` to relative residual `opts.eps`.
pub fn aab_solve<A: LinearOperator + ?Sized>(
    op: &A,
    b: &[f64],
    lambda: f64,
    opts: AabOptions,
    flops: &mut FlopCounter,
) -> Result<AabResult> {
    if !(opts.eps > 0.0) {
        return Err(invalid("sub-solver tolerance must be positive"));
    }
    let max_iter = opts
        .max_iter
        .unwrap_or_else(|| default_max_iter(op.nrows(), op.ncols(), opts.eps, opts.kappa_est))
        .max(1);
    let mut st = AabState::new(op, b, lambda, flops)?;
    if st.iter() == 0 {
        return Ok(AabResult {
            x: st.into_x(),
            iters: 0,
            relres: 0.0,
            stop: AabStop::Converged,
        });
    }
    let stop = loop {
        if st.exhausted() {
            break AabStop::Breakdown;
        }
        if st.iter() >= max_iter {
            break AabStop::MaxIter;
        }
        st.advance(flops)?;
        if st.relres() < opts.eps {
            break AabStop::Converged;
        }
    };
    Ok(AabResult {
        iters: st.iter(),
        relres: st.relres(),
        x: st.into_x(),
        stop,
    })
}

/// Explicit `‖(AᵀA + λI)x − b‖ / ‖b‖`; 0 when `b = 0`.
pub fn aab_residual_check<A: LinearOperator + ?Sized>(op: &A, b: &[f64], lambda: f64, x: &[f64]) -> Result<f64> {
    check_dim("residual check right-hand side", op.ncols(), b.len())?;
    check_dim("residual check iterate", op.ncols(), x.len())?;
    let nb = norm2(b);
    if nb == 0.0 {
        return Ok(0.0);
    }
    let mut ax = vec![0.0; op.nrows()];
    op.apply(x, &mut ax);
    let mut r = vec![0.0; op.ncols()];
    op.apply_t(&ax, &mut r);
    for ((r, x), b) in r.iter_mut().zip(x).zip(b) {
        *r += lambda * x - b;
    }
    Ok(norm2(&r) / nb)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{relative_error, Cholesky, DenseMatrix};
    use crate::rng::RngState;

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
        let mut rng = RngState::new(seed);
        DenseMatrix::from_fn(rows, cols, |_, _| rng.normal())
    }

    fn dense_oracle(a: &DenseMatrix, b: &[f64], lambda: f64) -> Vec<f64> {
        let mut h = a.tr_matmul(a);
        for i in 0..h.cols() {
            h[(i, i)] += lambda;
        }
        Cholesky::new(&h).unwrap().solve(b)
    }

    fn opts(eps: f64, max_iter: usize) -> AabOptions {
        AabOptions::new(eps).with_max_iter(max_iter)
    }

    #[test]
    fn identity_unregularized_is_one_step() {
        let a = DenseMatrix::identity(5);
        let b = [1.0, -2.0, 3.0, 0.5, 4.0];
        let r = aab_solve(&a, &b, 0.0, opts(1e-12, 50), &mut FlopCounter::new()).unwrap();
        assert_eq!(r.iters, 1);
        assert!(relative_error(&r.x, &b) < 1e-15);
        assert!(r.converged());
    }

    #[test]
    fn identity_unit_shift_halves() {
        let a = DenseMatrix::identity(4);
        let b = [2.0, 4.0, -6.0, 8.0];
        let r = aab_solve(&a, &b, 1.0, opts(1e-12, 50), &mut FlopCounter::new()).unwrap();
        let half: Vec<f64> = b.iter().map(|v| v / 2.0).collect();
        assert!(relative_error(&r.x, &half) < 1e-15);
    }

    #[test]
    fn zero_rhs() {
        let a = random_matrix(6, 3, 1);
        let r = aab_solve(&a, &[0.0; 3], 0.5, opts(1e-8, 10), &mut FlopCounter::new()).unwrap();
        assert_eq!(r.x, vec![0.0; 3]);
        assert_eq!(r.iters, 0);
        assert_eq!(r.relres, 0.0);
    }

    #[test]
    fn matches_dense_oracle() {
        // 20×8 with singular values spread over three decades
        let q = random_matrix(20, 8, 3);
        let svd = crate::linalg::compact_svd(&q);
        let sig: Vec<f64> = (0..8).map(|i| 10f64.powf(-3.0 * i as f64 / 7.0)).collect();
        let mut a = DenseMatrix::zeros(20, 8);
        for k in 0..8 {
            for j in 0..8 {
                for i in 0..20 {
                    a[(i, j)] += svd.u[(i, k)] * sig[k] * svd.v[(j, k)];
                }
            }
        }
        let b: Vec<f64> = (0..8).map(|i| (i as f64).sin() + 0.3).collect();
        let r = aab_solve(&a, &b, 0.1, opts(1e-12, 200), &mut FlopCounter::new()).unwrap();
        let oracle = dense_oracle(&a, &b, 0.1);
        assert!(relative_error(&r.x, &oracle) <= 1e-9);
        let explicit = aab_residual_check(&a, &b, 0.1, &r.x).unwrap();
        assert!(explicit <= 1e-11, "{explicit}");
    }

    #[test]
    fn residual_check_conventions() {
        let a = random_matrix(7, 4, 5);
        let b = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(aab_residual_check(&a, &b, 0.3, &[0.0; 4]).unwrap(), 1.0);
        assert_eq!(aab_residual_check(&a, &[0.0; 4], 0.3, &b).unwrap(), 0.0);
        let x = dense_oracle(&a, &b, 0.3);
        assert!(aab_residual_check(&a, &b, 0.3, &x).unwrap() <= 1e-12);
    }

    #[test]
    fn recurrence_tracks_explicit_residual() {
        let a = random_matrix(40, 15, 9);
        let b: Vec<f64> = (0..15).map(|i| 1.0 + i as f64).collect();
        let mut flops = FlopCounter::new();
        let mut st = AabState::new(&a, &b, 0.01, &mut flops).unwrap();
        for _ in 0..12 {
            let t = st.probe(&mut flops).unwrap();
            let explicit = aab_residual_check(&a, &b, 0.01, st.x()).unwrap();
            assert!((t - explicit).abs() <= 1e-6 * explicit.max(1e-300), "{t} vs {explicit}");
            st.advance(&mut flops).unwrap();
        }
    }

    #[test]
    fn krylov_vectors_ignore_the_shift() {
        let a = random_matrix(30, 10, 11);
        let b: Vec<f64> = (0..10).map(|i| (i as f64 * 0.7).cos()).collect();
        let mut f = FlopCounter::new();
        let mut s1 = AabState::new(&a, &b, 0.1, &mut f).unwrap();
        let mut s2 = AabState::new(&a, &b, 5.0, &mut f).unwrap();
        for _ in 0..6 {
            s1.advance(&mut f).unwrap();
            s2.advance(&mut f).unwrap();
            let diff: f64 = s1
                .v()
                .iter()
                .zip(s2.v())
                .map(|(p, q)| (p - q).abs())
                .fold(0.0, f64::max);
            assert!(diff <= 1e-12);
        }
    }

    #[test]
    fn finite_termination_on_small_systems() {
        for seed in 0..20 {
            let a = random_matrix(8, 5, 100 + seed);
            let b: Vec<f64> = (0..5).map(|i| i as f64 - 2.0).collect();
            let r = aab_solve(&a, &b, 0.2, opts(1e-13, 100), &mut FlopCounter::new()).unwrap();
            // d + 1 in exact arithmetic; one more step absorbs lost orthogonality
            assert!(r.iters <= 7, "{} iterations {:?}", r.iters, r.stop);
            assert!(r.converged());
            assert!(aab_residual_check(&a, &b, 0.2, &r.x).unwrap() < 1e-12);
        }
    }

    #[test]
    fn rank_deficient_unregularized_breaks_down_cleanly() {
        // rank 2 matrix with b in the row space
        let a = DenseMatrix::from_row_major(3, 3, &[1.0, 0.0, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        let b = [1.0, 4.0, 0.0];
        let r = aab_solve(&a, &b, 0.0, opts(1e-14, 10), &mut FlopCounter::new()).unwrap();
        assert!(relative_error(&r.x, &[1.0, 1.0, 0.0]) < 1e-12);
    }

    #[test]
    fn two_reductions_per_step_and_subsolver_category_only() {
        let a = random_matrix(25, 10, 4);
        let b = [1.0; 10];
        let mut f = FlopCounter::new();
        let r = aab_solve(&a, &b, 0.05, opts(1e-10, 100), &mut f).unwrap();
        // init: two normalizers; each completed step two more
        assert_eq!(r.stop, AabStop::Converged);
        assert_eq!(f.reductions(), 2 * r.iters as u64);
        assert_eq!(f.get(FlopCategory::InnerProducts), 0);
        assert_eq!(f.total(), f.get(FlopCategory::Subsolver));
        let (m, n) = (25u64, 10u64);
        let init = 2 * m * n + 3 * m + 5 * n + 6;
        let probe = 2 * m * n + 5 * n + 3;
        let advance = 2 * m * n + 8 * m + 2 * n + 12;
        let k = r.iters as u64;
        assert_eq!(f.total(), init + (k - 1) * (probe + advance));
    }

    #[test]
    fn default_cap() {
        assert_eq!(default_max_iter(50, 20, 0.1, None), 20);
        assert_eq!(default_max_iter(50, 20, 0.1, Some(4.0)), 10);
        assert_eq!(default_max_iter(0, 20, 0.1, None), 1);
    }

    #[test]
    fn max_iter_is_flagged() {
        let a = random_matrix(30, 20, 8);
        let b = [1.0; 20];
        let r = aab_solve(&a, &b, 1e-6, opts(1e-14, 3), &mut FlopCounter::new()).unwrap();
        assert_eq!(r.iters, 3);
        assert_eq!(r.stop, AabStop::MaxIter);
        assert!(!r.converged());
    }
}
