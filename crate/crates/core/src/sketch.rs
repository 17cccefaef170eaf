//! Randomized embeddings `S ∈ R^{m×n}` with `E[SᵀS] = I_n`.
//!
//! Four families are supported:
//!
//! * [`SketchKind::CountSketch`]: one ±1 per column, `SA` in `O(nnz(A))`.
//! * [`SketchKind::Osnap`]: `s` entries ±1/√s per column in distinct rows,
//!   `SA` in `O(s·nnz(A))`.
//! * [`SketchKind::Srht`]: `√(n_pad/m) · P H D` with a random sign diagonal
//!   `D`, the orthonormal Walsh–Hadamard transform `H` on the input
//!   zero-padded to `n_pad = 2^⌈log₂ n⌉`, and `P` selecting `m` distinct
//!   rows. `SA` in `O(nd log n)`.
//! * [`SketchKind::Gaussian`]: i.i.d. `N(0, 1/m)` entries, `SA` in `O(mnd)`.
//!
//! [`SketchKind::Identity`] (`m = n`, `S = I`) is the unsketched reference
//! used to check that solvers reduce to exact Newton steps.
//!
//! Sparse payloads are stored as per-column row indices and signs, never
//! densely. An operator is a pure function of `(kind, n, m, seed)`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, invalid, Result};
use crate::flops::{FlopCategory, FlopCounter};
use crate::linalg::{axpy, DenseMatrix};
use crate::math;
use crate::rng::RngState;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SketchKind {
    CountSketch,
    Osnap { s: usize },
    Srht,
    Gaussian,
    Identity,
}

impl SketchKind {
    pub fn name(&self) -> &'static str {
        match self {
            SketchKind::CountSketch => "count_sketch",
            SketchKind::Osnap { .. } => "osnap",
            SketchKind::Srht => "srht",
            SketchKind::Gaussian => "gaussian",
            SketchKind::Identity => "identity",
        }
    }
}

/// Kind-specific data needed to apply `S`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SketchPayload {
    /// Column `j` has nonzeros at `rows[j*s..(j+1)*s]` with values
    /// `signs[..] * scale`.
    Sparse {
        per_column: usize,
        rows: Vec<u32>,
        signs: Vec<i8>,
        scale: f64,
    },
    Srht {
        signs: Vec<i8>,
        sampled_rows: Vec<u32>,
        padded_len: usize,
    },
    Dense(DenseMatrix),
    Identity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SketchOperator {
    kind: SketchKind,
    m: usize,
    n: usize,
    seed: u64,
    payload: SketchPayload,
}

/// Draws a sketch of `m` rows for inputs with `n` rows.
pub fn build_sketch(kind: SketchKind, n: usize, m: usize, seed: u64) -> Result<SketchOperator> {
    if m == 0 {
        return Err(invalid("sketch size m must be at least 1"));
    }
    if n == 0 {
        return Err(invalid("sketch input dimension n must be at least 1"));
    }
    if m > u32::MAX as usize {
        return Err(invalid("sketch size too large"));
    }
    let mut rng = RngState::new(seed);
    let payload = match kind {
        SketchKind::CountSketch => {
            let rows = (0..n).map(|_| rng.below(m) as u32).collect();
            let signs = (0..n).map(|_| rademacher_i8(&mut rng)).collect();
            SketchPayload::Sparse {
                per_column: 1,
                rows,
                signs,
                scale: 1.0,
            }
        }
        SketchKind::Osnap { s } => {
            if s == 0 {
                return Err(invalid("OSNAP needs at least one nonzero per column"));
            }
            if s > m {
                return Err(invalid(format!(
                    "OSNAP with {s} nonzeros per column needs m >= s, got m = {m}"
                )));
            }
            let mut rows = Vec::with_capacity(n * s);
            let mut signs = Vec::with_capacity(n * s);
            for _ in 0..n {
                for r in rng.distinct_indices(m, s) {
                    rows.push(r as u32);
                    signs.push(rademacher_i8(&mut rng));
                }
            }
            SketchPayload::Sparse {
                per_column: s,
                rows,
                signs,
                scale: 1.0 / math::sqrt(s as f64),
            }
        }
        SketchKind::Srht => {
            if m > n {
                return Err(invalid(format!("SRHT needs m <= n (m = {m}, n = {n})")));
            }
            let padded_len = n.next_power_of_two();
            let signs = (0..n).map(|_| rademacher_i8(&mut rng)).collect();
            let sampled_rows = rng
                .distinct_indices(padded_len, m)
                .into_iter()
                .map(|r| r as u32)
                .collect();
            SketchPayload::Srht {
                signs,
                sampled_rows,
                padded_len,
            }
        }
        SketchKind::Gaussian => {
            let scale = 1.0 / math::sqrt(m as f64);
            SketchPayload::Dense(DenseMatrix::from_fn(m, n, |_, _| scale * rng.normal()))
        }
        SketchKind::Identity => {
            if m != n {
                return Err(invalid(format!("identity sketch needs m = n (m = {m}, n = {n})")));
            }
            SketchPayload::Identity
        }
    };
    Ok(SketchOperator {
        kind,
        m,
        n,
        seed,
        payload,
    })
}

fn rademacher_i8(rng: &mut RngState) -> i8 {
    if rng.rademacher() > 0.0 {
        1
    } else {
        -1
    }
}

impl SketchOperator {
    pub fn kind(&self) -> SketchKind {
        self.kind
    }

    /// Target (output) rows.
    pub fn m(&self) -> usize {
        self.m
    }

    /// Source (input) rows.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn payload(&self) -> &SketchPayload {
        &self.payload
    }

    /// `S·M` for an `n × d` matrix, charging the kind's complexity class to
    /// [`FlopCategory::SketchBuild`].
    pub fn apply(&self, mat: &DenseMatrix, flops: &mut FlopCounter) -> Result<DenseMatrix> {
        check_dim("sketch input rows", self.n, mat.rows())?;
        let d = mat.cols();
        let mut out = DenseMatrix::zeros(self.m, d);
        let charge = match &self.payload {
            SketchPayload::Sparse {
                per_column,
                rows,
                signs,
                scale,
            } => {
                let s = *per_column;
                let mut nnz = 0u64;
                for j in 0..d {
                    let src = mat.col(j);
                    let dst = out.col_mut(j);
                    for (i, &v) in src.iter().enumerate() {
                        if v == 0.0 {
                            continue;
                        }
                        nnz += 1;
                        let v = v * scale;
                        for k in i * s..(i + 1) * s {
                            dst[rows[k] as usize] += f64::from(signs[k]) * v;
                        }
                    }
                }
                // one multiply and one add per touched entry
                2 * s as u64 * nnz
            }
            SketchPayload::Srht {
                signs,
                sampled_rows,
                padded_len,
            } => {
                let np = *padded_len;
                let norm = math::sqrt(np as f64 / self.m as f64) / math::sqrt(np as f64);
                let mut buf = vec![0.0; np];
                for j in 0..d {
                    buf.fill(0.0);
                    for (b, (&v, &sg)) in buf.iter_mut().zip(mat.col(j).iter().zip(signs)) {
                        *b = f64::from(sg) * v;
                    }
                    fwht(&mut buf);
                    let dst = out.col_mut(j);
                    for (o, &r) in dst.iter_mut().zip(sampled_rows) {
                        *o = norm * buf[r as usize];
                    }
                }
                let per_col = self.n as u64 + np as u64 * math::log2_ceil(np) as u64 + self.m as u64;
                per_col * d as u64
            }
            SketchPayload::Dense(s) => {
                for j in 0..d {
                    let dst = out.col_mut(j);
                    for (k, &w) in mat.col(j).iter().enumerate() {
                        if w != 0.0 {
                            axpy(w, s.col(k), dst);
                        }
                    }
                }
                2 * (self.m * self.n) as u64 * d as u64
            }
            SketchPayload::Identity => {
                out = mat.clone();
                0
            }
        };
        flops.charge(FlopCategory::SketchBuild, charge)?;
        Ok(out)
    }

    /// `S·v` for a single vector.
    pub fn apply_vec(&self, v: &[f64], flops: &mut FlopCounter) -> Result<Vec<f64>> {
        let m = DenseMatrix::from_col_major(v.len(), 1, v.to_vec())?;
        Ok(self.apply(&m, flops)?.into_vec())
    }

    /// The explicit `m × n` matrix. For tests and small diagnostics.
    pub fn to_dense(&self) -> DenseMatrix {
        let mut scratch = FlopCounter::new();
        self.apply(&DenseMatrix::identity(self.n), &mut scratch)
            .expect("identity has n rows")
    }
}

/// In-place unnormalized fast Walsh–Hadamard transform; `buf.len()` must be
/// a power of two.
pub fn fwht(buf: &mut [f64]) {
    let n = buf.len();
    debug_assert!(n.is_power_of_two());
    let mut h = 1;
    while h < n {
        for chunk in buf.chunks_exact_mut(2 * h) {
            let (lo, hi) = chunk.split_at_mut(h);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let (x, y) = (*a, *b);
                *a = x + y;
                *b = x - y;
            }
        }
        h *= 2;
    }
}

/// Sketch-size rule parameters: the leading constant `c` replacing the
/// asymptotic `Ω(·)`, and the OSNAP logarithm base.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SizingRule {
    pub c: f64,
    pub osnap_base: f64,
}

impl Default for SizingRule {
    fn default() -> Self {
        Self {
            c: 1.0,
            osnap_base: core::f64::consts::E,
        }
    }
}

/// Sketch size guaranteeing an `eps`-embedding of the statistical-dimension
/// subspace with failure probability `delta`, up to the constant `c`:
///
/// | kind        | m                                         |
/// |-------------|-------------------------------------------|
/// | CountSketch | sd² / (ε² δ)                              |
/// | OSNAP       | α · sd · ln(sd/δ) / ε²                    |
/// | SRHT        | (sd + ln(1/(εδ)) · ln(sd/δ)) / ε²          |
/// | Gaussian    | sd / ε²                                   |
pub fn recommended_sketch_size(kind: SketchKind, sd: f64, eps: f64, delta: f64, c: f64) -> Result<usize> {
    recommended_sketch_size_with(
        kind,
        sd,
        eps,
        delta,
        SizingRule {
            c,
            ..SizingRule::default()
        },
    )
}

pub fn recommended_sketch_size_with(
    kind: SketchKind,
    sd: f64,
    eps: f64,
    delta: f64,
    rule: SizingRule,
) -> Result<usize> {
    check_sizing_args(sd, eps, delta, rule)?;
    let e2 = eps * eps;
    let raw = match kind {
        SketchKind::CountSketch => sd * sd / (e2 * delta),
        SketchKind::Osnap { .. } => rule.osnap_base * sd * math::ln(sd / delta) / e2,
        SketchKind::Srht => (sd + math::ln(1.0 / (eps * delta)) * math::ln(sd / delta)) / e2,
        SketchKind::Gaussian => sd / e2,
        SketchKind::Identity => return Err(invalid("identity sketch has no size rule")),
    };
    Ok((math::ceil(rule.c * raw) as usize).max(1))
}

/// Nonzeros per column for OSNAP: `log_α(sd/δ) / ε`, at least 1.
pub fn recommended_osnap_sparsity(sd: f64, eps: f64, delta: f64, rule: SizingRule) -> Result<usize> {
    check_sizing_args(sd, eps, delta, rule)?;
    if rule.osnap_base <= 1.0 {
        return Err(invalid("OSNAP logarithm base must exceed 1"));
    }
    let raw = math::ln(sd / delta) / math::ln(rule.osnap_base) / eps;
    Ok((math::ceil(rule.c * raw) as usize).max(1))
}

fn check_sizing_args(sd: f64, eps: f64, delta: f64, rule: SizingRule) -> Result<()> {
    if !(sd >= 1.0) {
        return Err(invalid(format!("statistical dimension must be >= 1, got {sd}")));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(invalid(format!("eps must lie in (0, 1), got {eps}")));
    }
    if !(delta > 0.0 && delta <= 0.5) {
        return Err(invalid(format!("delta must lie in (0, 1/2], got {delta}")));
    }
    if !(rule.c > 0.0) {
        return Err(invalid("leading constant c must be positive"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{relative_error, DenseMatrix};

    fn kinds() -> [SketchKind; 5] {
        [
            SketchKind::CountSketch,
            SketchKind::Osnap { s: 3 },
            SketchKind::Srht,
            SketchKind::Gaussian,
            SketchKind::Identity,
        ]
    }

    #[test]
    fn single_column_count_sketch_is_plus_minus_one() {
        for seed in 0..8 {
            let s = build_sketch(SketchKind::CountSketch, 1, 1, seed).unwrap().to_dense();
            assert_eq!(s.shape(), (1, 1));
            assert_eq!(s[(0, 0)].abs(), 1.0);
        }
    }

    #[test]
    fn construction_is_deterministic() {
        let a = build_sketch(SketchKind::Gaussian, 4, 2, 7).unwrap();
        let b = build_sketch(SketchKind::Gaussian, 4, 2, 7).unwrap();
        assert_eq!(a, b);
        let c = build_sketch(SketchKind::Gaussian, 4, 2, 8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn parameter_errors() {
        assert!(build_sketch(SketchKind::Gaussian, 4, 0, 1).is_err());
        assert!(build_sketch(SketchKind::Osnap { s: 5 }, 10, 4, 1).is_err());
        assert!(build_sketch(SketchKind::Osnap { s: 0 }, 10, 4, 1).is_err());
        assert!(build_sketch(SketchKind::Srht, 4, 8, 1).is_err());
        assert!(build_sketch(SketchKind::Identity, 4, 3, 1).is_err());
        let s = build_sketch(SketchKind::CountSketch, 5, 2, 1).unwrap();
        let mut f = FlopCounter::new();
        assert!(s.apply(&DenseMatrix::zeros(4, 2), &mut f).is_err());
    }

    #[test]
    fn column_structure_of_sparse_kinds() {
        let cs = build_sketch(SketchKind::CountSketch, 50, 7, 3).unwrap().to_dense();
        let os = build_sketch(SketchKind::Osnap { s: 3 }, 50, 7, 3).unwrap().to_dense();
        let inv = 1.0 / 3f64.sqrt();
        for j in 0..50 {
            let nz: Vec<f64> = cs.col(j).iter().copied().filter(|v| *v != 0.0).collect();
            assert_eq!(nz.len(), 1);
            assert_eq!(nz[0].abs(), 1.0);
            let nz: Vec<f64> = os.col(j).iter().copied().filter(|v| *v != 0.0).collect();
            assert_eq!(nz.len(), 3, "distinct rows");
            assert!(nz.iter().all(|v| (v.abs() - inv).abs() < 1e-15));
        }
    }

    #[test]
    fn count_sketch_with_forced_payload() {
        let n = 5;
        let op = SketchOperator {
            kind: SketchKind::CountSketch,
            m: 3,
            n,
            seed: 0,
            payload: SketchPayload::Sparse {
                per_column: 1,
                rows: vec![0; n],
                signs: vec![1; n],
                scale: 1.0,
            },
        };
        let mut f = FlopCounter::new();
        let sm = op.apply(&DenseMatrix::identity(n), &mut f).unwrap();
        for j in 0..n {
            assert_eq!(sm[(0, j)], 1.0);
            assert_eq!(sm[(1, j)], 0.0);
            assert_eq!(sm[(2, j)], 0.0);
        }
        assert_eq!(f.get(FlopCategory::SketchBuild), 2 * n as u64);
    }

    #[test]
    fn zero_matrix_maps_to_zero() {
        for kind in kinds() {
            let m = if kind == SketchKind::Identity { 16 } else { 6 };
            let s = build_sketch(kind, 16, m, 1).unwrap();
            let mut f = FlopCounter::new();
            let out = s.apply(&DenseMatrix::zeros(16, 3), &mut f).unwrap();
            assert_eq!(out, DenseMatrix::zeros(m, 3));
        }
    }

    #[test]
    fn fast_application_matches_dense_product() {
        let mut rng = RngState::new(77);
        let mat = DenseMatrix::from_fn(16, 3, |_, _| rng.normal());
        for kind in kinds() {
            let m = if kind == SketchKind::Identity { 16 } else { 6 };
            for seed in 0..5 {
                let s = build_sketch(kind, 16, m, seed).unwrap();
                let mut f = FlopCounter::new();
                let fast = s.apply(&mat, &mut f).unwrap();
                // dense oracle: build S column by column from unit vectors
                let dense = DenseMatrix::from_columns(
                    &(0..16)
                        .map(|j| {
                            let mut e = vec![0.0; 16];
                            e[j] = 1.0;
                            s.apply_vec(&e, &mut FlopCounter::new()).unwrap()
                        })
                        .collect::<Vec<_>>(),
                )
                .unwrap();
                let slow = dense.matmul(&mat);
                let err = fast.sub(&slow).frobenius_norm() / slow.frobenius_norm();
                assert!(err <= 1e-12, "{kind:?}: {err}");
            }
        }
    }

    #[test]
    fn srht_rows_are_orthogonal_with_norm_sqrt_n_over_m() {
        // rows of √(n/m)·P H D are orthogonal with squared norm n/m when n is a power of two
        let s = build_sketch(SketchKind::Srht, 16, 4, 9).unwrap().to_dense();
        let sst = s.matmul(&s.transpose());
        for i in 0..4 {
            for j in 0..4 {
                let expect = if i == j { 4.0 } else { 0.0 };
                assert!((sst[(i, j)] - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn count_sketch_is_unbiased() {
        // average of SᵀS over 10⁴ seeds is within 5e-2 of I_8
        let (n, m, trials) = (8, 4, 10_000);
        let mut acc = DenseMatrix::zeros(n, n);
        for seed in 0..trials {
            let s = build_sketch(SketchKind::CountSketch, n, m, seed).unwrap().to_dense();
            let g = s.tr_matmul(&s);
            for (a, b) in acc.as_mut_slice().iter_mut().zip(g.as_slice()) {
                *a += b;
            }
        }
        acc.scale(1.0 / trials as f64);
        let dev = acc.sub(&DenseMatrix::identity(n));
        assert!(dev.as_slice().iter().all(|v| v.abs() <= 5e-2));
    }

    #[test]
    fn flop_charges_follow_complexity_class() {
        let mut rng = RngState::new(1);
        let mat = DenseMatrix::from_fn(64, 4, |i, _| if i % 3 == 0 { rng.normal() } else { 0.0 });
        let nnz = mat.nnz() as u64;
        let mut f = FlopCounter::new();
        build_sketch(SketchKind::CountSketch, 64, 8, 0)
            .unwrap()
            .apply(&mat, &mut f)
            .unwrap();
        assert_eq!(f.total(), 2 * nnz);
        let mut f = FlopCounter::new();
        build_sketch(SketchKind::Osnap { s: 2 }, 64, 8, 0)
            .unwrap()
            .apply(&mat, &mut f)
            .unwrap();
        assert_eq!(f.total(), 4 * nnz);
        let mut f = FlopCounter::new();
        build_sketch(SketchKind::Gaussian, 64, 8, 0)
            .unwrap()
            .apply(&mat, &mut f)
            .unwrap();
        assert_eq!(f.total(), 2 * 8 * 64 * 4);
        let mut f = FlopCounter::new();
        build_sketch(SketchKind::Srht, 64, 8, 0)
            .unwrap()
            .apply(&mat, &mut f)
            .unwrap();
        assert_eq!(f.total(), (64 + 64 * 6 + 8) * 4);
    }

    #[test]
    fn sketch_size_rules() {
        let g = recommended_sketch_size(SketchKind::Gaussian, 100.0, 0.5, 0.1, 1.0).unwrap();
        assert_eq!(g, 400);
        let cs = recommended_sketch_size(SketchKind::CountSketch, 10.0, 0.5, 0.5, 1.0).unwrap();
        assert_eq!(cs, 800);
        let doubled = recommended_sketch_size(SketchKind::CountSketch, 10.0, 0.5, 0.5, 2.0).unwrap();
        assert_eq!(doubled, 1600);
        let srht = recommended_sketch_size(SketchKind::Srht, 10.0, 0.5, 0.1, 1.0).unwrap();
        let expect = (10.0 + (1.0f64 / 0.05).ln() * (100.0f64).ln()) / 0.25;
        assert_eq!(srht, expect.ceil() as usize);
        let os = recommended_sketch_size(SketchKind::Osnap { s: 2 }, 10.0, 0.5, 0.1, 1.0).unwrap();
        assert_eq!(os, (core::f64::consts::E * 10.0 * 100f64.ln() / 0.25).ceil() as usize);
        assert!(recommended_sketch_size(SketchKind::Gaussian, 10.0, 1.0, 0.1, 1.0).is_err());
        assert!(recommended_sketch_size(SketchKind::Gaussian, 10.0, 0.5, 0.6, 1.0).is_err());
        assert!(recommended_sketch_size(SketchKind::Gaussian, 0.5, 0.5, 0.1, 1.0).is_err());
        let s = recommended_osnap_sparsity(10.0, 0.5, 0.1, SizingRule::default()).unwrap();
        assert_eq!(s, (100f64.ln() / 0.5).ceil() as usize);
    }

    #[test]
    fn relative_error_helper_sanity() {
        assert_eq!(relative_error(&[1.0, 0.0], &[1.0, 0.0]), 0.0);
    }
}
