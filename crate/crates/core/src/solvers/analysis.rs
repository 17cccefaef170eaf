//! Quantities from the convergence theory that need a full SVD: the
//! embedding basis `U₁ = UΣD`, the distortion `‖U₁ᵀSᵀSU₁ − U₁ᵀU₁‖₂` of a
//! sketch on it, and the `D⁻¹` semi-norm `‖diag(√(σᵢ²+λ)) Vᵀe‖₂` in which
//! the contraction is stated. Test- and bench-scale only.

use alloc::vec::Vec;

use crate::error::{check_dim, Result};
use crate::flops::FlopCounter;
use crate::linalg::{norm2, spectral_norm, CompactSvd, DenseMatrix};
use crate::math;
use crate::sketch::SketchOperator;

/// `U diag(σᵢ/√(σᵢ²+λ))`, the first block of an orthonormal basis of
/// `[A; √λ I]`. For the dual variants pass the SVD of `Aᵀ`.
pub fn embedding_basis(svd: &CompactSvd, lambda: f64) -> DenseMatrix {
    let mut u1 = svd.u.clone();
    for (j, &s) in svd.singular_values.iter().enumerate() {
        let den = math::sqrt(s * s + lambda);
        let w = if den > 0.0 { s / den } else { 0.0 };
        for x in u1.col_mut(j) {
            *x *= w;
        }
    }
    u1
}

/// `‖(SU₁)ᵀSU₁ − U₁ᵀU₁‖₂`.
pub fn embedding_distortion(sketch: &SketchOperator, u1: &DenseMatrix) -> Result<f64> {
    let su = sketch.apply(u1, &mut FlopCounter::new())?;
    let diff = su.tr_matmul(&su).sub(&u1.tr_matmul(u1));
    Ok(spectral_norm(&diff))
}

/// `‖e‖_{D⁻¹} = ‖diag(√(σᵢ²+λ)) Vᵀe‖₂`.
pub fn d_inv_seminorm(svd: &CompactSvd, lambda: f64, e: &[f64]) -> Result<f64> {
    check_dim("semi-norm argument", svd.v.rows(), e.len())?;
    let c = svd.v.mul_t_vec(e);
    let weighted: Vec<f64> = c
        .iter()
        .zip(&svd.singular_values)
        .map(|(ci, s)| ci * math::sqrt(s * s + lambda))
        .collect();
    Ok(norm2(&weighted))
}

/// Semi-norm errors of a sequence of iterates against `reference`.
pub fn seminorm_errors(svd: &CompactSvd, lambda: f64, iterates: &[Vec<f64>], reference: &[f64]) -> Result<Vec<f64>> {
    iterates
        .iter()
        .map(|x| {
            let e: Vec<f64> = x.iter().zip(reference).map(|(a, b)| a - b).collect();
            d_inv_seminorm(svd, lambda, &e)
        })
        .collect()
}
