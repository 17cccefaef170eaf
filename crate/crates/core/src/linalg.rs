//! Dense kernels: column-major matrices, vector helpers, Householder QR,
//! one-sided Jacobi SVD, Cholesky, and Givens rotations.
//!
//! Everything here is sized for the "small" side of a sketched problem (the
//! m×d sketched matrix, test oracles) plus the matrix-vector products with the
//! full coefficient matrix. Storage is column-major: sketch application and
//! `Aᵀy` products sweep columns.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, invalid, Result};
use crate::math;

/// A dense real matrix stored column-major: entry `(i, j)` lives at
/// `data[i + j * rows]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &v) in diag.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for j in 0..cols {
            for i in 0..rows {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_col_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        check_dim("matrix storage length", rows * cols, data.len())?;
        Ok(Self { rows, cols, data })
    }

    pub fn from_row_major(rows: usize, cols: usize, data: &[f64]) -> Result<Self> {
        check_dim("matrix storage length", rows * cols, data.len())?;
        Ok(Self::from_fn(rows, cols, |i, j| data[i * cols + j]))
    }

    /// Builds a matrix from its columns; all columns must share one length.
    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self> {
        let rows = columns.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows * columns.len());
        for c in columns {
            check_dim("column length", rows, c.len())?;
            data.extend_from_slice(c);
        }
        Ok(Self {
            rows,
            cols: columns.len(),
            data,
        })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    /// Column-major storage.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn col(&self, j: usize) -> &[f64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    #[inline]
    pub fn col_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        (0..self.cols).map(|j| self[(i, j)]).collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn nnz(&self) -> usize {
        self.data.iter().filter(|&&v| v != 0.0).count()
    }

    pub fn frobenius_norm(&self) -> f64 {
        norm2(&self.data)
    }

    pub fn scale(&mut self, alpha: f64) {
        scal(alpha, &mut self.data);
    }

    /// `self − other`.
    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!(self.shape(), other.shape(), "matrix shapes differ");
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Self {
            rows: self.rows,
            cols: self.cols,
            data,
        }
    }

    /// Stacks `self` on top of `below`.
    pub fn vstack(&self, below: &Self) -> Self {
        assert_eq!(self.cols, below.cols, "vstack column counts differ");
        let rows = self.rows + below.rows;
        let mut data = Vec::with_capacity(rows * self.cols);
        for j in 0..self.cols {
            data.extend_from_slice(self.col(j));
            data.extend_from_slice(below.col(j));
        }
        Self {
            rows,
            cols: self.cols,
            data,
        }
    }

    /// `self · other`.
    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "matmul inner dimensions differ");
        let mut out = Self::zeros(self.rows, other.cols);
        for j in 0..other.cols {
            let dst = &mut out.data[j * self.rows..(j + 1) * self.rows];
            for (k, &w) in other.col(j).iter().enumerate() {
                if w != 0.0 {
                    axpy(w, self.col(k), dst);
                }
            }
        }
        out
    }

    /// `selfᵀ · other`.
    pub fn tr_matmul(&self, other: &Self) -> Self {
        assert_eq!(self.rows, other.rows, "tr_matmul row counts differ");
        Self::from_fn(self.cols, other.cols, |i, j| dot(self.col(i), other.col(j)))
    }

    /// `y = A x`.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.rows];
        self.mul_vec_into(x, &mut y);
        y
    }

    /// `y = A x`, overwriting `y`.
    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.cols, "mul_vec input length");
        assert_eq!(y.len(), self.rows, "mul_vec output length");
        y.fill(0.0);
        for (j, &xj) in x.iter().enumerate() {
            if xj != 0.0 {
                axpy(xj, self.col(j), y);
            }
        }
    }

    /// `x = Aᵀ y`.
    pub fn mul_t_vec(&self, y: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; self.cols];
        self.mul_t_vec_into(y, &mut x);
        x
    }

    /// `x = Aᵀ y`, overwriting `x`.
    pub fn mul_t_vec_into(&self, y: &[f64], x: &mut [f64]) {
        assert_eq!(y.len(), self.rows, "mul_t_vec input length");
        assert_eq!(x.len(), self.cols, "mul_t_vec output length");
        for (j, xj) in x.iter_mut().enumerate() {
            *xj = dot(self.col(j), y);
        }
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i + j * self.rows]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i + j * self.rows]
    }
}

/// A matrix-free view of a linear map `Rⁿ → Rᵐ` and its adjoint.
pub trait LinearOperator {
    fn nrows(&self) -> usize;
    fn ncols(&self) -> usize;
    /// `y = A x`.
    fn apply(&self, x: &[f64], y: &mut [f64]);
    /// `x = Aᵀ y`.
    fn apply_t(&self, y: &[f64], x: &mut [f64]);
}

impl LinearOperator for DenseMatrix {
    fn nrows(&self) -> usize {
        self.rows
    }

    fn ncols(&self) -> usize {
        self.cols
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.mul_vec_into(x, y)
    }

    fn apply_t(&self, y: &[f64], x: &mut [f64]) {
        self.mul_t_vec_into(y, x)
    }
}

/// The adjoint of a borrowed operator.
#[derive(Debug, Clone, Copy)]
pub struct Transposed<'a, A: ?Sized>(pub &'a A);

impl<A: LinearOperator + ?Sized> LinearOperator for Transposed<'_, A> {
    fn nrows(&self) -> usize {
        self.0.ncols()
    }

    fn ncols(&self) -> usize {
        self.0.nrows()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.0.apply_t(x, y)
    }

    fn apply_t(&self, y: &[f64], x: &mut [f64]) {
        self.0.apply(y, x)
    }
}

// ---------------------------------------------------------------------------
// vector helpers

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    // four independent accumulators; fixed order keeps results reproducible
    let mut acc = [0.0f64; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let mut tail = 0.0;
    for (x, y) in ra.iter().zip(rb) {
        tail += x * y;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[inline]
pub fn norm2(a: &[f64]) -> f64 {
    math::sqrt(dot(a, a))
}

/// `y += alpha · x`.
#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[inline]
pub fn scal(alpha: f64, x: &mut [f64]) {
    for v in x {
        *v *= alpha;
    }
}

/// `a − b` as a new vector.
pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// `‖a − b‖ / ‖b‖`, or `‖a‖` when `b` is zero.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let nb = norm2(b);
    let diff = norm2(&sub(a, b));
    if nb > 0.0 {
        diff / nb
    } else {
        diff
    }
}

// ---------------------------------------------------------------------------
// Givens

/// Plane rotation `(c, s, r)` with `c·a + s·b = r`, `−s·a + c·b = 0` and
/// `r ≥ 0`. Returns `(1, 0, 0)` when both inputs are zero.
pub fn givens(a: f64, b: f64) -> (f64, f64, f64) {
    if a == 0.0 && b == 0.0 {
        return (1.0, 0.0, 0.0);
    }
    let r = math::hypot(a, b);
    (a / r, b / r, r)
}

// ---------------------------------------------------------------------------
// Householder QR

/// Compact Householder QR. Reflector `k` is `I − τ_k v_k v_kᵀ` with
/// `v_k[k] = 1` and the tail stored below the diagonal.
#[derive(Debug, Clone)]
pub struct HouseholderQr {
    factors: DenseMatrix,
    taus: Vec<f64>,
}

impl HouseholderQr {
    pub fn new(mut a: DenseMatrix) -> Self {
        let (m, n) = a.shape();
        let steps = m.min(n);
        let mut taus = vec![0.0; steps];
        for k in 0..steps {
            let col = &mut a.data[k * m..(k + 1) * m];
            let alpha = col[k];
            let tail_norm = norm2(&col[k + 1..]);
            if tail_norm == 0.0 {
                // already upper triangular in this column
                continue;
            }
            let norm = math::hypot(alpha, tail_norm);
            let beta = if alpha >= 0.0 { -norm } else { norm };
            let scale = 1.0 / (alpha - beta);
            scal(scale, &mut col[k + 1..]);
            col[k] = beta;
            let tau = (beta - alpha) / beta;
            taus[k] = tau;

            let (head, rest) = a.data.split_at_mut((k + 1) * m);
            let v_tail = &head[k * m + k + 1..(k + 1) * m];
            for j in 0..n - k - 1 {
                let cj = &mut rest[j * m + k..(j + 1) * m];
                let w = cj[0] + dot(v_tail, &cj[1..]);
                let tw = tau * w;
                cj[0] -= tw;
                axpy(-tw, v_tail, &mut cj[1..]);
            }
        }
        Self { factors: a, taus }
    }

    /// The `min(m,n) × n` upper-triangular factor (no sign normalization).
    pub fn r(&self) -> DenseMatrix {
        let (m, n) = self.factors.shape();
        let k = m.min(n);
        DenseMatrix::from_fn(k, n, |i, j| if i <= j { self.factors[(i, j)] } else { 0.0 })
    }

    /// `y ← Q y` for a vector of length m.
    pub fn apply_q(&self, y: &mut [f64]) {
        let m = self.factors.rows();
        assert_eq!(y.len(), m);
        for k in (0..self.taus.len()).rev() {
            let tau = self.taus[k];
            if tau == 0.0 {
                continue;
            }
            let v_tail = &self.factors.col(k)[k + 1..];
            let w = y[k] + dot(v_tail, &y[k + 1..]);
            let tw = tau * w;
            y[k] -= tw;
            axpy(-tw, v_tail, &mut y[k + 1..]);
        }
    }

    /// `y ← Qᵀ y` for a vector of length m.
    pub fn apply_qt(&self, y: &mut [f64]) {
        let m = self.factors.rows();
        assert_eq!(y.len(), m);
        for k in 0..self.taus.len() {
            let tau = self.taus[k];
            if tau == 0.0 {
                continue;
            }
            let v_tail = &self.factors.col(k)[k + 1..];
            let w = y[k] + dot(v_tail, &y[k + 1..]);
            let tw = tau * w;
            y[k] -= tw;
            axpy(-tw, v_tail, &mut y[k + 1..]);
        }
    }
}

/// Upper-triangular `R` with `MᵀM = RᵀR` and a nonnegative diagonal.
///
/// Requires `rows ≥ cols`. Rank deficiency shows up as (near-)zero diagonal
/// entries; it is not an error here.
pub fn qr_r_factor(m: &DenseMatrix) -> Result<DenseMatrix> {
    if m.rows() < m.cols() {
        return Err(invalid("qr_r_factor needs at least as many rows as columns"));
    }
    let mut r = HouseholderQr::new(m.clone()).r();
    let n = r.cols();
    for i in 0..n {
        if r[(i, i)] < 0.0 {
            for j in i..n {
                r[(i, j)] = -r[(i, j)];
            }
        }
    }
    Ok(r)
}

/// Solves `R x = y` in place for upper-triangular `R`.
pub fn solve_upper(r: &DenseMatrix, y: &mut [f64]) -> Result<()> {
    let n = r.cols();
    check_dim("triangular solve rhs", n, y.len())?;
    for i in (0..n).rev() {
        let rii = r[(i, i)];
        if rii == 0.0 {
            return Err(crate::Error::Singular(alloc::format!(
                "zero pivot at row {i} of triangular factor"
            )));
        }
        y[i] /= rii;
        let yi = y[i];
        axpy(-yi, &r.col(i)[..i], &mut y[..i]);
    }
    Ok(())
}

/// Solves `Rᵀ x = y` in place for upper-triangular `R`.
pub fn solve_upper_transpose(r: &DenseMatrix, y: &mut [f64]) -> Result<()> {
    let n = r.cols();
    check_dim("triangular solve rhs", n, y.len())?;
    for i in 0..n {
        let rii = r[(i, i)];
        if rii == 0.0 {
            return Err(crate::Error::Singular(alloc::format!(
                "zero pivot at row {i} of triangular factor"
            )));
        }
        let s = dot(&r.col(i)[..i], &y[..i]);
        y[i] = (y[i] - s) / rii;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Cholesky

/// Lower-triangular Cholesky factor of a symmetric positive definite matrix.
#[derive(Debug, Clone)]
pub struct Cholesky {
    l: DenseMatrix,
}

impl Cholesky {
    pub fn new(a: &DenseMatrix) -> Result<Self> {
        let n = a.rows();
        check_dim("cholesky (square)", n, a.cols())?;
        let mut l = DenseMatrix::zeros(n, n);
        for j in 0..n {
            let mut d = a[(j, j)];
            for k in 0..j {
                d -= l[(j, k)] * l[(j, k)];
            }
            if d <= 0.0 || !d.is_finite() {
                return Err(crate::Error::Singular(alloc::format!(
                    "matrix not positive definite (pivot {j})"
                )));
            }
            let djj = math::sqrt(d);
            l[(j, j)] = djj;
            for i in j + 1..n {
                let mut s = a[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / djj;
            }
        }
        Ok(Self { l })
    }

    /// The lower-triangular `L` with `LLᵀ = A`.
    pub fn factor(&self) -> &DenseMatrix {
        &self.l
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.l.rows();
        let mut y = b.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for k in 0..i {
                s -= self.l[(i, k)] * y[k];
            }
            y[i] = s / self.l[(i, i)];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in i + 1..n {
                s -= self.l[(k, i)] * y[k];
            }
            y[i] = s / self.l[(i, i)];
        }
        y
    }
}

// ---------------------------------------------------------------------------
// SVD

/// Compact SVD `M = U diag(σ) Vᵀ` with `r = min(rows, cols)` columns.
#[derive(Debug, Clone)]
pub struct CompactSvd {
    pub u: DenseMatrix,
    /// Descending, nonnegative.
    pub singular_values: Vec<f64>,
    pub v: DenseMatrix,
}

impl CompactSvd {
    pub fn rank(&self) -> usize {
        self.singular_values.len()
    }

    /// `σ_max / σ_min`; infinite when the smallest value is zero.
    pub fn condition_number(&self) -> f64 {
        match (self.singular_values.first(), self.singular_values.last()) {
            (Some(&hi), Some(&lo)) if lo > 0.0 => hi / lo,
            (Some(_), Some(_)) => f64::INFINITY,
            _ => 1.0,
        }
    }

    /// `U diag(σ) Vᵀ`.
    pub fn reconstruct(&self) -> DenseMatrix {
        let mut us = self.u.clone();
        for (j, &s) in self.singular_values.iter().enumerate() {
            scal(s, us.col_mut(j));
        }
        us.matmul(&self.v.transpose())
    }
}

/// Compact SVD by one-sided Jacobi, after a QR reduction when the matrix is
/// tall. Accurate to a few ulps relative to `‖M‖`; intended for the
/// moderately sized matrices of tests, problem generation and oracles.
pub fn compact_svd(m: &DenseMatrix) -> CompactSvd {
    let (rows, cols) = m.shape();
    if rows < cols {
        let t = compact_svd(&m.transpose());
        return CompactSvd {
            u: t.v,
            singular_values: t.singular_values,
            v: t.u,
        };
    }
    if rows == cols || cols == 0 {
        return jacobi_svd(m.clone());
    }
    let qr = HouseholderQr::new(m.clone());
    let inner = jacobi_svd(qr.r());
    let mut u = DenseMatrix::zeros(rows, cols);
    for j in 0..cols {
        let col = u.col_mut(j);
        col[..cols].copy_from_slice(inner.u.col(j));
        qr.apply_q(col);
    }
    CompactSvd {
        u,
        singular_values: inner.singular_values,
        v: inner.v,
    }
}

/// One-sided Jacobi on a matrix with `rows ≥ cols`.
fn jacobi_svd(mut w: DenseMatrix) -> CompactSvd {
    let (rows, n) = w.shape();
    let mut v = DenseMatrix::identity(n);
    let tol = f64::EPSILON;
    for _sweep in 0..80 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let (alpha, beta, gamma) = {
                    let (wp, wq) = (w.col(p), w.col(q));
                    (dot(wp, wp), dot(wq, wq), dot(wp, wq))
                };
                if gamma == 0.0 || gamma.abs() <= tol * math::sqrt(alpha) * math::sqrt(beta) {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + math::sqrt(1.0 + zeta * zeta));
                let c = 1.0 / math::sqrt(1.0 + t * t);
                let s = c * t;
                rotate_columns(&mut w, p, q, c, s);
                rotate_columns(&mut v, p, q, c, s);
            }
        }
        if !rotated {
            break;
        }
    }

    let norms: Vec<f64> = (0..n).map(|j| norm2(w.col(j))).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| norms[b].total_cmp(&norms[a]));
    let sigma_max = order.first().map_or(0.0, |&j| norms[j]);
    let negligible = sigma_max * f64::EPSILON * rows.max(1) as f64;

    let mut u_cols: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut v_cols: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut sigma = Vec::with_capacity(n);
    let mut pending = Vec::new();
    for &j in &order {
        let s = norms[j];
        if s > negligible && s > 0.0 {
            let mut c = w.col(j).to_vec();
            scal(1.0 / s, &mut c);
            u_cols.push(c);
        } else {
            pending.push(u_cols.len());
            u_cols.push(Vec::new());
        }
        v_cols.push(v.col(j).to_vec());
        sigma.push(s);
    }
    // orthonormal completion for numerically null directions
    let mut probe = 0;
    for slot in pending {
        loop {
            assert!(probe < rows, "cannot complete orthonormal basis");
            let mut e = vec![0.0; rows];
            e[probe] = 1.0;
            probe += 1;
            for _pass in 0..2 {
                for c in u_cols.iter().filter(|c| !c.is_empty()) {
                    let h = dot(c, &e);
                    axpy(-h, c, &mut e);
                }
            }
            let nrm = norm2(&e);
            if nrm > 0.5 {
                scal(1.0 / nrm, &mut e);
                u_cols[slot] = e;
                break;
            }
        }
    }
    CompactSvd {
        u: DenseMatrix::from_columns(&u_cols).expect("uniform column lengths"),
        singular_values: sigma,
        v: DenseMatrix::from_columns(&v_cols).expect("uniform column lengths"),
    }
}

fn rotate_columns(m: &mut DenseMatrix, p: usize, q: usize, c: f64, s: f64) {
    let rows = m.rows();
    let (lo, hi) = m.data.split_at_mut(q * rows);
    let cp = &mut lo[p * rows..(p + 1) * rows];
    let cq = &mut hi[..rows];
    for (a, b) in cp.iter_mut().zip(cq.iter_mut()) {
        let (x, y) = (*a, *b);
        *a = c * x - s * y;
        *b = s * x + c * y;
    }
}

/// Largest singular value.
pub fn spectral_norm(m: &DenseMatrix) -> f64 {
    compact_svd(m).singular_values.first().copied().unwrap_or(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngState;

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
        let mut rng = RngState::new(seed);
        DenseMatrix::from_fn(rows, cols, |_, _| rng.normal())
    }

    fn orthonormality_defect(q: &DenseMatrix) -> f64 {
        q.tr_matmul(q).sub(&DenseMatrix::identity(q.cols())).frobenius_norm()
    }

    #[test]
    fn givens_cases() {
        assert_eq!(givens(1.0, 0.0), (1.0, 0.0, 1.0));
        assert_eq!(givens(0.0, 1.0), (0.0, 1.0, 1.0));
        assert_eq!(givens(0.0, 0.0), (1.0, 0.0, 0.0));
        let (c, s, r) = givens(3.0, 4.0);
        assert!((c - 0.6).abs() < 1e-15 && (s - 0.8).abs() < 1e-15 && (r - 5.0).abs() < 1e-15);
        let (c, s, r) = givens(-3.0, 4.0);
        assert!(r > 0.0 && (c * -3.0 + s * 4.0 - r).abs() < 1e-14);
    }

    #[test]
    fn qr_r_factor_cases() {
        assert_eq!(
            qr_r_factor(&DenseMatrix::identity(3)).unwrap(),
            DenseMatrix::identity(3)
        );
        let m = DenseMatrix::from_row_major(2, 1, &[3.0, 4.0]).unwrap();
        let r = qr_r_factor(&m).unwrap();
        assert_eq!(r.shape(), (1, 1));
        assert!((r[(0, 0)] - 5.0).abs() < 1e-15);
        assert!(qr_r_factor(&DenseMatrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn qr_r_factor_reproduces_gram_matrix() {
        let m = random_matrix(20, 5, 11);
        let r = qr_r_factor(&m).unwrap();
        let g = m.tr_matmul(&m);
        let rel = g.sub(&r.tr_matmul(&r)).frobenius_norm() / g.frobenius_norm();
        assert!(rel <= 1e-12, "rel = {rel}");
        for i in 0..5 {
            assert!(r[(i, i)] >= 0.0);
            for j in 0..i {
                assert_eq!(r[(i, j)], 0.0);
            }
        }
    }

    #[test]
    fn qr_of_rank_deficient_matrix_does_not_fail() {
        let m = DenseMatrix::from_fn(6, 3, |i, j| if j == 2 { 0.0 } else { (i + j) as f64 });
        let r = qr_r_factor(&m).unwrap();
        assert!(r[(2, 2)].abs() < 1e-12);
    }

    #[test]
    fn q_application_is_orthogonal() {
        let m = random_matrix(9, 4, 2);
        let qr = HouseholderQr::new(m.clone());
        let mut y: Vec<f64> = (0..9).map(|i| i as f64 - 3.0).collect();
        let orig = y.clone();
        qr.apply_qt(&mut y);
        qr.apply_q(&mut y);
        assert!(relative_error(&y, &orig) < 1e-14);
        // Q [R; 0] = M
        let r = qr.r();
        for j in 0..4 {
            let mut c = vec![0.0; 9];
            c[..4].copy_from_slice(&r.col(j)[..4]);
            qr.apply_q(&mut c);
            assert!(relative_error(&c, m.col(j)) < 1e-13);
        }
    }

    #[test]
    fn svd_of_diagonal_and_zero() {
        let s = compact_svd(&DenseMatrix::from_diag(&[2.0, 1.0]));
        assert_eq!(s.singular_values, vec![2.0, 1.0]);
        assert!(s.u.sub(&DenseMatrix::identity(2)).frobenius_norm() < 1e-15);
        assert!(s.v.sub(&DenseMatrix::identity(2)).frobenius_norm() < 1e-15);

        let z = compact_svd(&DenseMatrix::zeros(3, 2));
        assert_eq!(z.singular_values, vec![0.0, 0.0]);
        assert!(orthonormality_defect(&z.u) < 1e-12);
        assert!(orthonormality_defect(&z.v) < 1e-12);
    }

    #[test]
    fn svd_reconstructs_random_matrices() {
        for (k, &(r, c)) in [(12, 7), (7, 12), (30, 30), (64, 32), (5, 1)].iter().enumerate() {
            let m = random_matrix(r, c, 100 + k as u64);
            let s = compact_svd(&m);
            let err = s.reconstruct().sub(&m).frobenius_norm() / m.frobenius_norm();
            assert!(err <= 1e-12, "{r}x{c}: {err}");
            assert!(orthonormality_defect(&s.u) < 1e-10);
            assert!(orthonormality_defect(&s.v) < 1e-10);
            assert!(s.singular_values.windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn svd_of_rank_deficient_matrix_keeps_orthonormal_u() {
        let a = random_matrix(10, 2, 4);
        let b = random_matrix(2, 6, 5);
        let m = a.matmul(&b); // rank 2
        let s = compact_svd(&m);
        assert!(s.singular_values[2] < 1e-12 * s.singular_values[0]);
        assert!(orthonormality_defect(&s.u) < 1e-10);
        assert!(s.reconstruct().sub(&m).frobenius_norm() < 1e-12 * m.frobenius_norm());
    }

    #[test]
    fn cholesky_solves_spd_system() {
        let m = random_matrix(15, 6, 8);
        let mut g = m.tr_matmul(&m);
        for i in 0..6 {
            g[(i, i)] += 0.5;
        }
        let x: Vec<f64> = (0..6).map(|i| 1.0 + i as f64).collect();
        let b = g.mul_vec(&x);
        let sol = Cholesky::new(&g).unwrap().solve(&b);
        assert!(relative_error(&sol, &x) < 1e-12);
        assert!(Cholesky::new(&DenseMatrix::zeros(2, 2)).is_err());
    }

    #[test]
    fn triangular_solves_invert_r() {
        let r = qr_r_factor(&random_matrix(8, 4, 3)).unwrap();
        let x = vec![1.0, -2.0, 0.5, 3.0];
        let mut y = r.mul_vec(&x);
        solve_upper(&r, &mut y).unwrap();
        assert!(relative_error(&y, &x) < 1e-12);
        let mut z = r.transpose().mul_vec(&x);
        solve_upper_transpose(&r, &mut z).unwrap();
        assert!(relative_error(&z, &x) < 1e-12);
    }

    #[test]
    fn transposed_operator_swaps_roles() {
        let m = random_matrix(5, 3, 1);
        let t = Transposed(&m);
        assert_eq!((t.nrows(), t.ncols()), (3, 5));
        let y = vec![1.0, 2.0, 3.0, 4.0, 5.0];
        let mut x = vec![0.0; 3];
        t.apply(&y, &mut x);
        assert_eq!(x, m.mul_t_vec(&y));
    }

    #[test]
    fn dot_matches_naive_sum() {
        let a: Vec<f64> = (0..37).map(|i| (i as f64).sin()).collect();
        let b: Vec<f64> = (0..37).map(|i| (i as f64 * 0.3).cos()).collect();
        let naive: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
        assert!((dot(&a, &b) - naive).abs() < 1e-13);
    }
}
