//! Statistical dimension `sd_λ(A) = Σ σᵢ²/(σᵢ²+λ)`: the exact value from
//! singular values, and an inexact Hutchinson estimate from a sketch `SA`.
//!
//! The estimator uses `d − sd_λ = λ·tr((AᵀSᵀSA + λI)⁻¹)` and replaces the
//! trace by `(1/T) Σ vᵀ(AᵀSᵀSA + λI)⁻¹v` over random probes `v`, each inverse
//! applied loosely by the `AᵀA` sub-solver.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::flops::{FlopCategory, FlopCounter};
use crate::linalg::{dot, DenseMatrix};
use crate::rng::{child_seed, RngState};
use crate::subsolver::{aab_solve, AabOptions};

/// `Σ σᵢ²/(σᵢ² + λ)`; with `λ = 0` the number of nonzero `σᵢ`.
pub fn sd_exact(sigma: &[f64], lambda: f64) -> f64 {
    sigma
        .iter()
        .map(|&s| {
            let s2 = s * s;
            if s2 == 0.0 {
                0.0
            } else {
                s2 / (s2 + lambda)
            }
        })
        .sum()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Probe {
    #[default]
    Rademacher,
    Gaussian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SdEstimate {
    /// `d − τ/T` clamped to `[0, d]`.
    pub value: f64,
    /// Unclamped `d − τ/T`.
    pub raw: f64,
    pub samples: usize,
    /// `λ⟨vₗ, zₗ⟩` per probe, in probe order.
    pub traces: Vec<f64>,
    pub eps_tr: f64,
    pub d: usize,
}

impl SdEstimate {
    /// The estimate clamped to `[1, d]`, the range the empirical momentum
    /// rule accepts. Overestimates only slow convergence down.
    pub fn for_momentum(&self) -> f64 {
        self.raw.clamp(1.0, self.d.max(1) as f64)
    }
}

/// Inexact Hutchinson estimate of `sd_λ` from the sketched matrix `SA`
/// (`m × d`) with `T` Rademacher probes, each solved to tolerance `eps_tr`.
pub fn hutchinson_sd(
    sa: &DenseMatrix,
    lambda: f64,
    samples: usize,
    eps_tr: f64,
    seed: u64,
    flops: &mut FlopCounter,
) -> Result<SdEstimate> {
    hutchinson_sd_with(sa, lambda, samples, eps_tr, Probe::Rademacher, seed, flops)
}

pub fn hutchinson_sd_with(
    sa: &DenseMatrix,
    lambda: f64,
    samples: usize,
    eps_tr: f64,
    probe: Probe,
    seed: u64,
    flops: &mut FlopCounter,
) -> Result<SdEstimate> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(invalid(format!("trace estimation needs lambda > 0, got {lambda}")));
    }
    if samples == 0 {
        return Err(invalid("trace estimation needs at least one probe"));
    }
    if !(eps_tr > 0.0) {
        return Err(invalid("trace tolerance must be positive"));
    }
    let d = sa.cols();
    let mut traces = Vec::with_capacity(samples);
    let mut tau = 0.0;
    let mut v = vec![0.0; d];
    for l in 0..samples {
        // each probe has its own stream so probes are order independent
        let mut rng = RngState::new(child_seed(seed, l as u64));
        for vi in v.iter_mut() {
            *vi = match probe {
                Probe::Rademacher => rng.rademacher(),
                Probe::Gaussian => rng.normal(),
            };
        }
        // drawing the probes is not charged
        let z = aab_solve(
            sa,
            &v,
            lambda,
            AabOptions::new(eps_tr).with_max_iter(d.max(1) * 4),
            flops,
        )?;
        let t = lambda * dot(&v, &z.x);
        flops.charge(FlopCategory::InnerProducts, 2 * d as u64)?;
        flops.note_reduction();
        traces.push(t);
        tau += t;
    }
    let raw = d as f64 - tau / samples as f64;
    Ok(SdEstimate {
        value: raw.clamp(0.0, d as f64),
        raw,
        samples,
        traces,
        eps_tr,
        d,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::compact_svd;
    use crate::rng::RngState;

    #[test]
    fn exact_values() {
        assert_eq!(sd_exact(&[1.0, 1.0, 1.0], 0.0), 3.0);
        assert_eq!(sd_exact(&[1.0, 1.0], 1.0), 1.0);
        let v = sd_exact(&[2.0, 1.0, 0.5], 0.25);
        let expect = 4.0 / 4.25 + 1.0 / 1.25 + 0.25 / 0.5;
        assert!((v - expect).abs() < 1e-15);
        assert!((v - 2.241176).abs() < 1e-6);
        assert_eq!(sd_exact(&[3.0, 0.0], 0.0), 1.0);
    }

    #[test]
    fn exact_is_decreasing_in_lambda() {
        let s = [3.0, 1.0, 0.1, 0.01];
        let mut prev = f64::INFINITY;
        for k in -6..4 {
            let v = sd_exact(&s, 10f64.powi(k));
            assert!(v < prev);
            assert!((0.0..=4.0).contains(&v));
            prev = v;
        }
    }

    fn random_sa(m: usize, d: usize, seed: u64) -> DenseMatrix {
        let mut rng = RngState::new(seed);
        DenseMatrix::from_fn(m, d, |_, j| rng.normal() / (1.0 + j as f64))
    }

    #[test]
    fn accurate_with_many_probes() {
        let sa = random_sa(80, 12, 5);
        let exact = sd_exact(&compact_svd(&sa).singular_values, 0.5);
        let est = hutchinson_sd(&sa, 0.5, 64, 1e-10, 3, &mut FlopCounter::new()).unwrap();
        assert!((est.value - exact).abs() <= 0.15 * exact, "{} vs {exact}", est.value);
        assert_eq!(est.traces.len(), 64);
    }

    #[test]
    fn limits_in_lambda() {
        let sa = random_sa(40, 6, 8);
        let tiny = hutchinson_sd(&sa, 1e-10, 4, 1e-12, 1, &mut FlopCounter::new()).unwrap();
        assert!((tiny.value - 6.0).abs() < 1e-3);
        let huge = hutchinson_sd(&sa, 1e10, 4, 1e-12, 1, &mut FlopCounter::new()).unwrap();
        assert!(huge.value < 1e-3);
        assert_eq!(huge.for_momentum(), 1.0);
    }

    #[test]
    fn parameter_errors() {
        let sa = random_sa(10, 3, 1);
        assert!(hutchinson_sd(&sa, 0.0, 2, 0.5, 1, &mut FlopCounter::new()).is_err());
        assert!(hutchinson_sd(&sa, 1.0, 0, 0.5, 1, &mut FlopCounter::new()).is_err());
    }

    #[test]
    fn gaussian_probes_and_determinism() {
        let sa = random_sa(30, 5, 2);
        let a = hutchinson_sd_with(&sa, 0.2, 8, 1e-8, Probe::Gaussian, 4, &mut FlopCounter::new()).unwrap();
        let b = hutchinson_sd_with(&sa, 0.2, 8, 1e-8, Probe::Gaussian, 4, &mut FlopCounter::new()).unwrap();
        assert_eq!(a, b);
        assert!(a.value > 0.0 && a.value <= 5.0);
    }
}
