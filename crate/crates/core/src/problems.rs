//! Synthetic ill-posed test problems and SVD-based oracles.
//!
//! A generated problem starts from an `n × d` sample whose rows are drawn
//! from `N(1_d, Γ)`, `Γᵢⱼ = 5 · 0.9^|i−j|`. Its singular vectors are kept and
//! its singular values are replaced by a decay profile scaled to a target
//! condition number. The right-hand side is `b = A x₀ + ω` with `ω` Gaussian
//! and rescaled so that `‖ω‖ / ‖A x₀‖` equals the requested noise level
//! exactly.
//!
//! The named profiles are parametric stand-ins for the usual regularization
//! test-problem spectra, not bit-exact copies; [`SingularProfile::FromFile`]
//! imports arbitrary values. Every profile is written as
//! `σᵢ = κ^{−h(tᵢ)}` with `tᵢ = (i−1)/(r−1)`, `h(0) = 0`, `h(1) = 1`:
//!
//! * `Geometric`: `h(t) = t`.
//! * `PhilipsLike`: `h(t) = t²`, slow decay at the top of the spectrum and
//!   fast decay at the bottom.
//! * `HeatLike`: `h(t) = ln(1 + t(r−1)) / ln r`, i.e. `σᵢ ∝ i^{−p}`, a much
//!   slower algebraic decay.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, invalid, Result};
use crate::linalg::{compact_svd, dot, norm2, relative_error, Cholesky, CompactSvd, DenseMatrix};
use crate::math;
use crate::rng::RngState;

/// Regularized least-squares instance `min ‖Ax − b‖² + λ‖x‖²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Problem {
    pub a: DenseMatrix,
    pub b: Vec<f64>,
    pub x_true: Option<Vec<f64>>,
    pub lambda: f64,
    pub meta: ProblemMeta,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ProblemMeta {
    pub profile: String,
    pub kappa: f64,
    pub noise_level: f64,
    pub seed: u64,
    pub signal: Option<Signal>,
}

impl Problem {
    pub fn new(a: DenseMatrix, b: Vec<f64>, lambda: f64) -> Result<Self> {
        let p = Self {
            a,
            b,
            x_true: None,
            lambda,
            meta: ProblemMeta::default(),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_x_true(mut self, x_true: Vec<f64>) -> Result<Self> {
        check_dim("x_true length", self.a.cols(), x_true.len())?;
        self.x_true = Some(x_true);
        Ok(self)
    }

    pub fn with_lambda(mut self, lambda: f64) -> Result<Self> {
        self.lambda = lambda;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        check_dim("right-hand side length", self.a.rows(), self.b.len())?;
        if let Some(x) = &self.x_true {
            check_dim("x_true length", self.a.cols(), x.len())?;
        }
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(invalid(format!("lambda must be finite and >= 0, got {}", self.lambda)));
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.a.rows()
    }

    pub fn d(&self) -> usize {
        self.a.cols()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SingularProfile {
    Geometric,
    PhilipsLike,
    HeatLike,
    /// Descending positive values; the first `min(n, d)` are used after
    /// rescaling their log-spread to the target condition number.
    FromFile(Vec<f64>),
}

impl SingularProfile {
    pub fn name(&self) -> &'static str {
        match self {
            SingularProfile::Geometric => "geometric",
            SingularProfile::PhilipsLike => "philips_like",
            SingularProfile::HeatLike => "heat_like",
            SingularProfile::FromFile(_) => "from_file",
        }
    }

    /// The `r` singular values, descending, with `σ₁ = 1` and `σ₁/σᵣ = κ`.
    pub fn singular_values(&self, r: usize, kappa: f64) -> Result<Vec<f64>> {
        if r == 0 {
            return Err(invalid("profile needs at least one value"));
        }
        if !(kappa >= 1.0) || !kappa.is_finite() {
            return Err(invalid(format!("condition number must be >= 1, got {kappa}")));
        }
        let lk = math::ln(kappa);
        let t = |i: usize| if r == 1 { 0.0 } else { i as f64 / (r - 1) as f64 };
        let exponents: Vec<f64> = match self {
            SingularProfile::Geometric => (0..r).map(t).collect(),
            SingularProfile::PhilipsLike => (0..r).map(|i| t(i) * t(i)).collect(),
            SingularProfile::HeatLike => {
                if r == 1 {
                    vec![0.0]
                } else {
                    let lr = math::ln(r as f64);
                    (0..r).map(|i| math::ln(1.0 + t(i) * (r - 1) as f64) / lr).collect()
                }
            }
            SingularProfile::FromFile(values) => {
                if values.len() < r {
                    return Err(invalid(format!(
                        "profile supplies {} values, need at least {r}",
                        values.len()
                    )));
                }
                let v = &values[..r];
                if v.iter().any(|x| !(*x > 0.0) || !x.is_finite()) {
                    return Err(invalid("profile values must be positive and finite"));
                }
                if v.windows(2).any(|w| w[1] > w[0]) {
                    return Err(invalid("profile values must be non-increasing"));
                }
                let spread = math::ln(v[0] / v[r - 1]);
                if spread == 0.0 {
                    vec![0.0; r]
                } else {
                    v.iter().map(|x| math::ln(v[0] / x) / spread).collect()
                }
            }
        };
        Ok(exponents.into_iter().map(|h| math::exp(-lk * h)).collect())
    }
}

/// Ground-truth signal `x₀`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Signal {
    /// `sin(2πt) + ½ sin(6πt) + ½` sampled at `t = (j−1)/(d−1)`.
    #[default]
    Smooth,
    /// i.i.d. uniform on `(−1, 1)`.
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub n: usize,
    pub d: usize,
    pub profile: SingularProfile,
    pub kappa: f64,
    pub noise_level: f64,
    #[serde(default)]
    pub signal: Signal,
    pub seed: u64,
}

pub fn generate_problem(
    n: usize,
    d: usize,
    profile: SingularProfile,
    kappa: f64,
    noise_level: f64,
    seed: u64,
) -> Result<Problem> {
    generate_problem_with(&ProblemSpec {
        n,
        d,
        profile,
        kappa,
        noise_level,
        signal: Signal::Smooth,
        seed,
    })
}

/// Builds the problem described by `spec`; `lambda` is left at 0.
pub fn generate_problem_with(spec: &ProblemSpec) -> Result<Problem> {
    let (n, d) = (spec.n, spec.d);
    if n < 2 || d < 2 {
        return Err(invalid(format!("problem dimensions must be at least 2, got {n}×{d}")));
    }
    if !(spec.noise_level >= 0.0) || !spec.noise_level.is_finite() {
        return Err(invalid("noise level must be finite and >= 0"));
    }
    let r = n.min(d);
    let sigma = spec.profile.singular_values(r, spec.kappa)?;

    let sample = correlated_sample(n, d, &mut RngState::child(spec.seed, 0))?;
    let svd = compact_svd(&sample);
    let a = assemble(&svd.u, &sigma, &svd.v);

    let x_true = signal(spec.signal, d, &mut RngState::child(spec.seed, 1));
    let clean = a.mul_vec(&x_true);
    let mut b = clean.clone();
    if spec.noise_level > 0.0 {
        let mut rng = RngState::child(spec.seed, 2);
        let mut w: Vec<f64> = (0..n).map(|_| rng.normal()).collect();
        let scale = spec.noise_level * norm2(&clean) / norm2(&w);
        for (bi, wi) in b.iter_mut().zip(w.iter_mut()) {
            *wi *= scale;
            *bi += *wi;
        }
    }
    Ok(Problem {
        a,
        b,
        x_true: Some(x_true),
        lambda: 0.0,
        meta: ProblemMeta {
            profile: spec.profile.name().to_string(),
            kappa: spec.kappa,
            noise_level: spec.noise_level,
            seed: spec.seed,
            signal: Some(spec.signal),
        },
    })
}

/// `n` rows drawn from `N(1_d, Γ)` with `Γᵢⱼ = 5 · 0.9^|i−j|`.
pub fn correlated_sample(n: usize, d: usize, rng: &mut RngState) -> Result<DenseMatrix> {
    let gamma = DenseMatrix::from_fn(d, d, |i, j| 5.0 * math::powf(0.9, i.abs_diff(j) as f64));
    let chol = Cholesky::new(&gamma)?;
    let lt = chol.factor().transpose();
    let mut out = DenseMatrix::zeros(n, d);
    let mut z = vec![0.0; d];
    for i in 0..n {
        for zj in z.iter_mut() {
            *zj = rng.normal();
        }
        for j in 0..d {
            // row_i = 1 + L z
            out[(i, j)] = 1.0 + dot(&lt.col(j)[..=j], &z[..=j]);
        }
    }
    Ok(out)
}

fn assemble(u: &DenseMatrix, sigma: &[f64], v: &DenseMatrix) -> DenseMatrix {
    let mut us = u.clone();
    for (j, &s) in sigma.iter().enumerate() {
        for x in us.col_mut(j) {
            *x *= s;
        }
    }
    us.matmul(&v.transpose())
}

fn signal(kind: Signal, d: usize, rng: &mut RngState) -> Vec<f64> {
    match kind {
        Signal::Smooth => {
            let two_pi = 2.0 * core::f64::consts::PI;
            (0..d)
                .map(|j| {
                    let t = j as f64 / (d - 1).max(1) as f64;
                    math::sin(two_pi * t) + 0.5 * math::sin(3.0 * two_pi * t) + 0.5
                })
                .collect()
        }
        Signal::Uniform => (0..d).map(|_| rng.uniform_in(-1.0, 1.0)).collect(),
    }
}

/// SVD of a problem matrix with closed-form ridge quantities.
#[derive(Debug, Clone)]
pub struct SpectralOracle {
    pub svd: CompactSvd,
    n: usize,
    d: usize,
}

impl SpectralOracle {
    pub fn new(a: &DenseMatrix) -> Self {
        Self {
            svd: compact_svd(a),
            n: a.rows(),
            d: a.cols(),
        }
    }

    pub fn singular_values(&self) -> &[f64] {
        &self.svd.singular_values
    }

    /// `x*(λ) = V diag(σ/(σ²+λ)) Uᵀ b` (minimum-norm solution when λ = 0).
    pub fn ridge_solution(&self, b: &[f64], lambda: f64) -> Result<Vec<f64>> {
        check_dim("oracle right-hand side", self.n, b.len())?;
        let coef = self.svd.u.mul_t_vec(b);
        let scaled: Vec<f64> = coef
            .iter()
            .zip(&self.svd.singular_values)
            .map(|(&c, &s)| filter(s, lambda) * c)
            .collect();
        Ok(self.svd.v.mul_vec(&scaled))
    }

    /// `ν* = (b − A x*)/λ`, the dual optimum.
    pub fn dual_solution(&self, b: &[f64], lambda: f64) -> Result<Vec<f64>> {
        if !(lambda > 0.0) {
            return Err(invalid("dual solution needs lambda > 0"));
        }
        let coef = self.svd.u.mul_t_vec(b);
        // b − A x* = (I − UUᵀ) b + U diag(λ/(σ²+λ)) Uᵀ b
        let mut nu = b.to_vec();
        let adj: Vec<f64> = coef
            .iter()
            .zip(&self.svd.singular_values)
            .map(|(&c, &s)| c * (lambda / (s * s + lambda) - 1.0))
            .collect();
        let corr = self.svd.u.mul_vec(&adj);
        for (v, c) in nu.iter_mut().zip(corr) {
            *v = (*v + c) / lambda;
        }
        Ok(nu)
    }

    pub fn statistical_dimension(&self, lambda: f64) -> f64 {
        crate::estimate::sd_exact(&self.svd.singular_values, lambda)
    }

    /// `κ(AᵀA + λI_d)`; the missing directions when `d > n` have σ = 0.
    pub fn regularized_condition(&self, lambda: f64) -> f64 {
        let s = &self.svd.singular_values;
        let hi = s.first().copied().unwrap_or(0.0);
        let lo = if self.d > s.len() {
            0.0
        } else {
            s.last().copied().unwrap_or(0.0)
        };
        (hi * hi + lambda) / (lo * lo + lambda)
    }

    /// `κ(AAᵀ + λI_n)`.
    pub fn regularized_condition_dual(&self, lambda: f64) -> f64 {
        let s = &self.svd.singular_values;
        let hi = s.first().copied().unwrap_or(0.0);
        let lo = if self.n > s.len() {
            0.0
        } else {
            s.last().copied().unwrap_or(0.0)
        };
        (hi * hi + lambda) / (lo * lo + lambda)
    }

    /// `‖x*(λ) − x₀‖₂`, evaluated in the singular basis.
    pub fn solution_error(&self, b: &[f64], x0: &[f64], lambda: f64) -> f64 {
        let beta = self.svd.u.mul_t_vec(b);
        let c = self.svd.v.mul_t_vec(x0);
        let outside = (dot(x0, x0) - dot(&c, &c)).max(0.0);
        let inside: f64 = beta
            .iter()
            .zip(&c)
            .zip(&self.svd.singular_values)
            .map(|((&bi, &ci), &s)| {
                let e = filter(s, lambda) * bi - ci;
                e * e
            })
            .sum();
        math::sqrt(inside + outside)
    }
}

fn filter(s: f64, lambda: f64) -> f64 {
    let den = s * s + lambda;
    if den == 0.0 {
        0.0
    } else {
        s / den
    }
}

const GRID_POINTS: usize = 200;
const GOLDEN_TOL: f64 = 1e-3;

/// The `λ > 0` minimizing `‖x*(λ) − x₀‖₂`: a log-spaced scan over
/// `[σᵣ²·10⁻³, σ₁²·10³]` followed by golden-section refinement in `ln λ`.
pub fn optimal_lambda(problem: &Problem) -> Result<f64> {
    let x0 = problem
        .x_true
        .as_ref()
        .ok_or_else(|| invalid("optimal_lambda needs a problem with x_true"))?;
    let oracle = SpectralOracle::new(&problem.a);
    optimal_lambda_with(&oracle, &problem.b, x0)
}

pub fn optimal_lambda_with(oracle: &SpectralOracle, b: &[f64], x0: &[f64]) -> Result<f64> {
    let s = oracle.singular_values();
    let hi = s.first().copied().unwrap_or(0.0);
    let lo = s.iter().rev().copied().find(|v| *v > 0.0).unwrap_or(0.0);
    if hi == 0.0 {
        return Err(invalid("optimal_lambda needs a nonzero matrix"));
    }
    let (a, z) = (math::ln(lo * lo * 1e-3), math::ln(hi * hi * 1e3));
    let err = |t: f64| oracle.solution_error(b, x0, math::exp(t));
    let step = (z - a) / (GRID_POINTS - 1) as f64;
    let mut best = 0;
    let mut best_err = f64::INFINITY;
    for k in 0..GRID_POINTS {
        let e = err(a + step * k as f64);
        if e < best_err {
            best_err = e;
            best = k;
        }
    }
    if best == 0 {
        return Ok(math::exp(a));
    }
    if best == GRID_POINTS - 1 {
        return Ok(math::exp(z));
    }
    let (mut l, mut r) = (a + step * (best - 1) as f64, a + step * (best + 1) as f64);
    let g = 0.5 * (math::sqrt(5.0) - 1.0);
    let mut c = r - g * (r - l);
    let mut d = l + g * (r - l);
    let (mut fc, mut fd) = (err(c), err(d));
    while r - l > GOLDEN_TOL {
        if fc <= fd {
            r = d;
            d = c;
            fd = fc;
            c = r - g * (r - l);
            fc = err(c);
        } else {
            l = c;
            c = d;
            fc = fd;
            d = l + g * (r - l);
            fd = err(d);
        }
    }
    Ok(math::exp(0.5 * (l + r)))
}

/// `‖x − x_true‖ / ‖x_true‖`, erroring when the problem has no `x_true`.
pub fn error_to_truth(problem: &Problem, x: &[f64]) -> Result<f64> {
    let xt = problem
        .x_true
        .as_ref()
        .ok_or_else(|| invalid("problem has no x_true"))?;
    check_dim("iterate length", xt.len(), x.len())?;
    Ok(relative_error(x, xt))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profiles_hit_the_condition_number() {
        for profile in [
            SingularProfile::Geometric,
            SingularProfile::PhilipsLike,
            SingularProfile::HeatLike,
            SingularProfile::FromFile(vec![5.0, 3.0, 2.0, 0.1, 0.01]),
        ] {
            let s = profile.singular_values(5, 1e4).unwrap();
            assert_eq!(s[0], 1.0);
            assert!((s[0] / s[4] / 1e4 - 1.0).abs() < 1e-12, "{profile:?}");
            assert!(s.windows(2).all(|w| w[1] <= w[0]));
        }
        let flat = SingularProfile::Geometric.singular_values(6, 1.0).unwrap();
        assert!(flat.iter().all(|&v| v == 1.0));
        assert!(SingularProfile::FromFile(vec![1.0, 0.5])
            .singular_values(3, 10.0)
            .is_err());
    }

    #[test]
    fn philips_decays_slower_first_and_heat_decays_slowest() {
        let g = SingularProfile::Geometric.singular_values(50, 1e6).unwrap();
        let p = SingularProfile::PhilipsLike.singular_values(50, 1e6).unwrap();
        let h = SingularProfile::HeatLike.singular_values(50, 1e6).unwrap();
        assert!(p[10] > g[10]);
        assert!(p[45] < g[45] * 10.0);
        // algebraic profile front-loads its decay
        assert!(h[1] < g[1]);
    }

    #[test]
    fn noiseless_problem_is_consistent() {
        let p = generate_problem(30, 6, SingularProfile::Geometric, 100.0, 0.0, 3).unwrap();
        let ax = p.a.mul_vec(p.x_true.as_ref().unwrap());
        assert_eq!(ax, p.b);
    }

    #[test]
    fn generation_is_deterministic() {
        let a = generate_problem(20, 5, SingularProfile::HeatLike, 1e3, 0.01, 9).unwrap();
        let b = generate_problem(20, 5, SingularProfile::HeatLike, 1e3, 0.01, 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn unit_condition_gives_flat_spectrum() {
        let p = generate_problem(25, 8, SingularProfile::Geometric, 1.0, 0.0, 1).unwrap();
        let s = SpectralOracle::new(&p.a);
        assert!((s.svd.condition_number() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn wide_problems_generate() {
        let p = generate_problem(6, 20, SingularProfile::Geometric, 50.0, 0.01, 2).unwrap();
        let s = SpectralOracle::new(&p.a);
        assert_eq!(s.singular_values().len(), 6);
        assert!((s.svd.condition_number() / 50.0 - 1.0).abs() < 1e-8);
    }

    #[test]
    fn ridge_oracle_matches_normal_equations() {
        let p = generate_problem(15, 4, SingularProfile::Geometric, 10.0, 0.05, 4).unwrap();
        let oracle = SpectralOracle::new(&p.a);
        let x = oracle.ridge_solution(&p.b, 0.3).unwrap();
        let mut h = p.a.tr_matmul(&p.a);
        for i in 0..4 {
            h[(i, i)] += 0.3;
        }
        let expect = Cholesky::new(&h).unwrap().solve(&p.a.mul_t_vec(&p.b));
        assert!(relative_error(&x, &expect) < 1e-12);
        let nu = oracle.dual_solution(&p.b, 0.3).unwrap();
        let ax = p.a.mul_vec(&x);
        let direct: Vec<f64> = p.b.iter().zip(&ax).map(|(b, a)| (b - a) / 0.3).collect();
        assert!(relative_error(&nu, &direct) < 1e-10);
    }

    #[test]
    fn solution_error_matches_direct_evaluation() {
        let p = generate_problem(12, 5, SingularProfile::PhilipsLike, 1e3, 0.02, 6).unwrap();
        let oracle = SpectralOracle::new(&p.a);
        let xt = p.x_true.clone().unwrap();
        let x = oracle.ridge_solution(&p.b, 1e-3).unwrap();
        let direct = norm2(&crate::linalg::sub(&x, &xt));
        assert!((oracle.solution_error(&p.b, &xt, 1e-3) - direct).abs() < 1e-10);
    }

    #[test]
    fn optimal_lambda_is_a_local_minimum() {
        let p = generate_problem(60, 12, SingularProfile::Geometric, 1e4, 0.01, 2).unwrap();
        let oracle = SpectralOracle::new(&p.a);
        let xt = p.x_true.clone().unwrap();
        let lam = optimal_lambda(&p).unwrap();
        let e = |l: f64| oracle.solution_error(&p.b, &xt, l);
        assert!(e(lam / 2.0) >= e(lam));
        assert!(e(lam * 2.0) >= e(lam));
        assert_eq!(lam, optimal_lambda(&p).unwrap());
    }

    #[test]
    fn noiseless_well_conditioned_prefers_tiny_lambda() {
        let p = generate_problem(40, 6, SingularProfile::Geometric, 2.0, 0.0, 5).unwrap();
        let lam = optimal_lambda(&p).unwrap();
        let s = SpectralOracle::new(&p.a);
        let lo = s.singular_values()[5];
        assert!(lam <= lo * lo * 1e-3 * 1.0001);
    }

    #[test]
    fn optimal_lambda_requires_truth() {
        let p = Problem::new(DenseMatrix::identity(3), vec![1.0; 3], 0.0).unwrap();
        assert!(optimal_lambda(&p).is_err());
    }
}
