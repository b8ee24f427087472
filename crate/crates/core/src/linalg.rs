//! Dense row-major matrices and the spectral primitives built on them.
//!
//! Singular value decompositions use one-sided (Hestenes) Jacobi rotations,
//! which stay accurate to working precision on rank-deficient inputs; every
//! routine runs plain loops in a fixed order so results are reproducible.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use crate::error::{invalid, Result};

/// Relative threshold (times sigma_1) below which a singular value counts as zero.
pub const RANK_TOL: f64 = 1e-9;

/// Default relative tolerance handed to the truncated SVD by the projections.
pub const SVD_TOL: f64 = 1e-13;

#[derive(Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl fmt::Debug for DenseMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "DenseMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            writeln!(f, "  {:?}", self.row(i))?;
        }
        write!(f, "]")
    }
}

impl DenseMatrix {
    /// All-zero matrix. Panics on an empty shape.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows >= 1 && cols >= 1, "matrix dimensions must be positive");
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// Zero-column (or zero-row) container used for empty factor matrices.
    pub(crate) fn empty(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return invalid(format!("matrix shape {rows}x{cols} is empty"));
        }
        if data.len() != rows * cols {
            return invalid(format!(
                "expected {} entries for a {rows}x{cols} matrix, got {}",
                rows * cols,
                data.len()
            ));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return invalid(format!("non-finite entry at flat index {pos}"));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        if rows.iter().any(|row| row.len() != c) {
            return invalid("ragged rows");
        }
        Self::from_row_major(r, c, rows.concat())
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m.data[i * cols + j] = f(i, j);
            }
        }
        m
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    /// `rows x cols` matrix with `diag` on the main diagonal.
    pub fn from_diag(rows: usize, cols: usize, diag: &[f64]) -> Self {
        let mut m = Self::zeros(rows, cols);
        for (i, &v) in diag.iter().enumerate().take(rows.min(cols)) {
            m.data[i * cols + i] = v;
        }
        m
    }

    /// Outer product `u v^T`.
    pub fn outer(u: &[f64], v: &[f64]) -> Self {
        Self::from_fn(u.len(), v.len(), |i, j| u[i] * v[j])
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn add_at(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] += v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    /// Row-major entries.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&v| v == 0.0)
    }

    pub fn same_shape(&self, other: &DenseMatrix) -> bool {
        self.shape() == other.shape()
    }

    /// Frobenius inner product `<self, other>`.
    pub fn dot(&self, other: &DenseMatrix) -> f64 {
        debug_assert!(self.same_shape(other));
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    pub fn fro_norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn inf_norm(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn scaled(&self, a: f64) -> Self {
        self.map(|v| a * v)
    }

    pub fn scale_mut(&mut self, a: f64) {
        self.data.iter_mut().for_each(|v| *v *= a);
    }

    /// `self += a * x`
    pub fn axpy(&mut self, a: f64, x: &DenseMatrix) {
        assert!(self.same_shape(x), "axpy shape mismatch");
        for (s, v) in self.data.iter_mut().zip(&x.data) {
            *s += a * v;
        }
    }

    /// `a * self + b * other`
    pub fn lincomb(&self, a: f64, other: &DenseMatrix, b: f64) -> Self {
        assert!(self.same_shape(other), "lincomb shape mismatch");
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(x, y)| a * x + b * y)
            .collect();
        Self {
            rows: self.rows,
            cols: self.cols,
            data,
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::empty(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        t
    }

    pub fn matmul(&self, rhs: &DenseMatrix) -> Self {
        assert_eq!(self.cols, rhs.rows, "matmul inner dimension mismatch");
        let mut out = Self::empty(self.rows, rhs.cols);
        for i in 0..self.rows {
            let orow = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == 0.0 {
                    continue;
                }
                let brow = &rhs.data[k * rhs.cols..(k + 1) * rhs.cols];
                for (o, b) in orow.iter_mut().zip(brow) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// Subtract each row's mean from that row.
    pub fn center_rows(&mut self) {
        let c = self.cols as f64;
        for i in 0..self.rows {
            let row = self.row_mut(i);
            let mean = row.iter().sum::<f64>() / c;
            row.iter_mut().for_each(|v| *v -= mean);
        }
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.rows).map(|i| self.row(i).iter().sum()).collect()
    }

    /// Clamp every entry to `[-bound, bound]`.
    pub fn clip_entries(&mut self, bound: f64) {
        self.data.iter_mut().for_each(|v| *v = v.clamp(-bound, bound));
    }
}

impl Add for &DenseMatrix {
    type Output = DenseMatrix;
    fn add(self, rhs: &DenseMatrix) -> DenseMatrix {
        self.lincomb(1.0, rhs, 1.0)
    }
}

impl Sub for &DenseMatrix {
    type Output = DenseMatrix;
    fn sub(self, rhs: &DenseMatrix) -> DenseMatrix {
        self.lincomb(1.0, rhs, -1.0)
    }
}

impl Neg for &DenseMatrix {
    type Output = DenseMatrix;
    fn neg(self) -> DenseMatrix {
        self.scaled(-1.0)
    }
}

impl Mul<&DenseMatrix> for f64 {
    type Output = DenseMatrix;
    fn mul(self, rhs: &DenseMatrix) -> DenseMatrix {
        rhs.scaled(self)
    }
}

/// Leading singular triples. `left` is `d1 x k`, `right` is `d2 x k`.
#[derive(Clone, Debug)]
pub struct SvdResult {
    pub left: DenseMatrix,
    pub singvals: Vec<f64>,
    pub right: DenseMatrix,
}

impl SvdResult {
    pub fn rank(&self) -> usize {
        self.singvals.len()
    }

    /// `U diag(s) V^T` for an arbitrary replacement spectrum `s` (length k).
    pub fn reconstruct_with(&self, s: &[f64]) -> DenseMatrix {
        assert_eq!(s.len(), self.rank());
        let (d1, d2) = (self.left.rows(), self.right.rows());
        let mut out = DenseMatrix::zeros(d1, d2);
        for (idx, &sv) in s.iter().enumerate() {
            if sv == 0.0 {
                continue;
            }
            for i in 0..d1 {
                let ui = sv * self.left.get(i, idx);
                if ui == 0.0 {
                    continue;
                }
                let orow = out.row_mut(i);
                for (j, o) in orow.iter_mut().enumerate() {
                    *o += ui * self.right.get(j, idx);
                }
            }
        }
        out
    }

    pub fn reconstruct(&self) -> DenseMatrix {
        self.reconstruct_with(&self.singvals)
    }
}

fn check_finite(x: &DenseMatrix) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        invalid("matrix has non-finite entries")
    }
}

/// Sweeps after which Jacobi gives up; convergence normally takes under 15.
const JACOBI_MAX_SWEEPS: usize = 60;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn rotate(a: &mut [f64], b: &mut [f64], c: f64, s: f64) {
    for (x, y) in a.iter_mut().zip(b.iter_mut()) {
        let (u, v) = (*x, *y);
        *x = c * u - s * v;
        *y = s * u + c * v;
    }
}

/// Orthogonalise the columns of a tall matrix (given as column vectors) by
/// plane rotations; with `want_v` the rotations are accumulated as well.
fn hestenes(mut cols: Vec<Vec<f64>>, want_v: bool) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let n = cols.len();
    let m = cols.first().map_or(0, Vec::len);
    let mut v: Vec<Vec<f64>> = if want_v {
        (0..n)
            .map(|j| (0..n).map(|i| if i == j { 1.0 } else { 0.0 }).collect())
            .collect()
    } else {
        Vec::new()
    };
    let eps = (m.max(1) as f64) * f64::EPSILON;
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let gamma = dot(&cols[p], &cols[q]);
                if gamma == 0.0 {
                    continue;
                }
                let alpha = dot(&cols[p], &cols[p]);
                let beta = dot(&cols[q], &cols[q]);
                if gamma.abs() <= eps * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                let (head, tail) = cols.split_at_mut(q);
                rotate(&mut head[p], &mut tail[0], c, s);
                if want_v {
                    let (head, tail) = v.split_at_mut(q);
                    rotate(&mut head[p], &mut tail[0], c, s);
                }
            }
        }
        if !rotated {
            break;
        }
    }
    (cols, v)
}

/// Columns of `x`, or of `x^T` when `x` is wide, so that Jacobi sees a tall matrix.
fn tall_columns(x: &DenseMatrix) -> (Vec<Vec<f64>>, bool) {
    let transposed = x.rows() < x.cols();
    let cols = if transposed {
        (0..x.rows()).map(|i| x.row(i).to_vec()).collect()
    } else {
        (0..x.cols()).map(|j| x.column(j)).collect()
    };
    (cols, transposed)
}

/// Unit vectors orthogonal to every vector in `basis`, filling `missing` slots.
fn complete_basis(basis: &mut [Vec<f64>], missing: &[usize], dim: usize) {
    let mut candidate = 0;
    for &slot in missing {
        while candidate < dim {
            let mut e = vec![0.0; dim];
            e[candidate] = 1.0;
            candidate += 1;
            // Two Gram-Schmidt passes against everything placed so far.
            for _ in 0..2 {
                for (k, b) in basis.iter().enumerate() {
                    if k == slot || b.iter().all(|&x| x == 0.0) {
                        continue;
                    }
                    let c = dot(&e, b);
                    e.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
                }
            }
            let norm = dot(&e, &e).sqrt();
            if norm > 0.5 {
                e.iter_mut().for_each(|x| *x /= norm);
                basis[slot] = e;
                break;
            }
        }
    }
}

/// Full thin SVD with singular values sorted nonincreasing.
pub fn svd_full(x: &DenseMatrix) -> Result<SvdResult> {
    check_finite(x)?;
    let (cols, transposed) = tall_columns(x);
    let m = cols[0].len();
    let (cols, v) = hestenes(cols, true);
    let k = cols.len();
    let norms: Vec<f64> = cols.iter().map(|c| dot(c, c).sqrt()).collect();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| norms[b].total_cmp(&norms[a]));

    let mut u_cols: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut v_cols: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut singvals = Vec::with_capacity(k);
    let mut missing = Vec::new();
    for (dst, &src) in order.iter().enumerate() {
        let s = norms[src];
        singvals.push(s);
        if s > 0.0 {
            u_cols.push(cols[src].iter().map(|c| c / s).collect());
        } else {
            u_cols.push(vec![0.0; m]);
            missing.push(dst);
        }
        v_cols.push(v[src].clone());
    }
    complete_basis(&mut u_cols, &missing, m);

    let (left_cols, right_cols) = if transposed { (v_cols, u_cols) } else { (u_cols, v_cols) };
    let (d1, d2) = x.shape();
    let to_matrix = |cs: &[Vec<f64>], rows: usize| {
        let mut out = DenseMatrix::empty(rows, k);
        for (c, col) in cs.iter().enumerate() {
            for (i, &val) in col.iter().enumerate() {
                out.set(i, c, val);
            }
        }
        out
    };
    Ok(SvdResult {
        left: to_matrix(&left_cols, d1),
        singvals,
        right: to_matrix(&right_cols, d2),
    })
}

/// The `min(r, rank)` leading singular triples of `x`, where singular values
/// at or below `tol * sigma_1` are treated as zero and dropped.
pub fn svd_top_r(x: &DenseMatrix, r: usize, tol: f64) -> Result<SvdResult> {
    let (d1, d2) = x.shape();
    if r == 0 || r > d1.min(d2) {
        return invalid(format!("rank {r} outside 1..={}", d1.min(d2)));
    }
    if !(tol > 0.0) {
        return invalid("svd tolerance must be positive");
    }
    let full = svd_full(x)?;
    let sigma1 = full.singvals.first().copied().unwrap_or(0.0);
    let keep = full
        .singvals
        .iter()
        .take(r)
        .take_while(|&&s| s > tol * sigma1 && s > 0.0)
        .count();
    Ok(truncate_svd(full, keep))
}

fn truncate_svd(full: SvdResult, keep: usize) -> SvdResult {
    let (d1, d2) = (full.left.rows(), full.right.rows());
    let k = full.rank();
    let pick = |m: &DenseMatrix, rows: usize| {
        let mut out = DenseMatrix::empty(rows, keep);
        for i in 0..rows {
            for c in 0..keep {
                out.set(i, c, m.get(i, c));
            }
        }
        out
    };
    if keep == k {
        return full;
    }
    SvdResult {
        left: pick(&full.left, d1),
        singvals: full.singvals[..keep].to_vec(),
        right: pick(&full.right, d2),
    }
}

/// Singular values only, sorted nonincreasing.
pub fn singular_values(x: &DenseMatrix) -> Result<Vec<f64>> {
    check_finite(x)?;
    let (cols, _) = hestenes(tall_columns(x).0, false);
    let mut s: Vec<f64> = cols.iter().map(|c| dot(c, c).sqrt()).collect();
    s.sort_by(|a, b| b.total_cmp(a));
    Ok(s)
}

/// Largest singular value. Exactly zero for the zero matrix.
///
/// Uses the full singular value computation, which is accurate to machine
/// precision; `tol` only has to be positive.
pub fn op_norm(x: &DenseMatrix, tol: f64) -> Result<f64> {
    if !(tol > 0.0) {
        return invalid("op_norm tolerance must be positive");
    }
    if x.is_zero() {
        return Ok(0.0);
    }
    Ok(singular_values(x)?[0])
}

/// Number of singular values above `tol * sigma_1`.
pub fn numerical_rank(x: &DenseMatrix, tol: f64) -> Result<usize> {
    let s = singular_values(x)?;
    Ok(count_above(&s, tol))
}

pub(crate) fn count_above(s: &[f64], tol: f64) -> usize {
    let s1 = s.first().copied().unwrap_or(0.0);
    if s1 == 0.0 {
        return 0;
    }
    s.iter().filter(|&&v| v > tol * s1).count()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Norms {
    pub fro: f64,
    /// Largest absolute entry.
    pub inf: f64,
    pub nuclear: f64,
}

pub fn norms(x: &DenseMatrix) -> Result<Norms> {
    let nuclear = singular_values(x)?.iter().sum();
    Ok(Norms {
        fro: x.fro_norm(),
        inf: x.inf_norm(),
        nuclear,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn top_r_of_diagonal() {
        let x = DenseMatrix::from_diag(3, 3, &[3.0, 2.0, 1.0]);
        let svd = svd_top_r(&x, 2, 1e-12).unwrap();
        assert_eq!(svd.rank(), 2);
        assert!(close(svd.singvals[0], 3.0, 1e-12));
        assert!(close(svd.singvals[1], 2.0, 1e-12));
        let rec = svd.reconstruct();
        let want = DenseMatrix::from_diag(3, 3, &[3.0, 2.0, 0.0]);
        assert!((&rec - &want).fro_norm() < 1e-12);
    }

    #[test]
    fn full_rank_truncation_is_identity() {
        let x = DenseMatrix::from_rows(&[&[1.0, -2.0, 0.5], &[0.3, 4.0, -1.0]]).unwrap();
        let svd = svd_top_r(&x, 2, 1e-12).unwrap();
        assert!((&svd.reconstruct() - &x).fro_norm() < 1e-12);
    }

    #[test]
    fn rank_deficient_input_returns_fewer_triples() {
        let x = DenseMatrix::outer(&[1.0, 2.0, 3.0], &[1.0, -1.0]);
        let svd = svd_top_r(&x, 2, 1e-10).unwrap();
        assert_eq!(svd.rank(), 1);
        assert_eq!(svd_top_r(&DenseMatrix::zeros(3, 2), 2, 1e-10).unwrap().rank(), 0);
        assert!(svd_top_r(&DenseMatrix::zeros(3, 2), 2, 1e-10)
            .unwrap()
            .reconstruct()
            .is_zero());
    }

    #[test]
    fn rejects_bad_rank_and_nonfinite() {
        let x = DenseMatrix::identity(3);
        assert!(svd_top_r(&x, 0, 1e-10).is_err());
        assert!(svd_top_r(&x, 4, 1e-10).is_err());
        let mut bad = DenseMatrix::identity(2);
        bad.set(0, 1, f64::NAN);
        assert!(svd_top_r(&bad, 1, 1e-10).is_err());
        assert!(DenseMatrix::from_row_major(1, 2, vec![1.0, f64::INFINITY]).is_err());
        assert!(DenseMatrix::from_row_major(0, 2, vec![]).is_err());
    }

    #[test]
    fn op_norm_examples() {
        let x = DenseMatrix::from_diag(2, 2, &[3.0, 2.0]);
        assert!(close(op_norm(&x, 1e-12).unwrap(), 3.0, 1e-12));
        assert_eq!(op_norm(&DenseMatrix::zeros(4, 4), 1e-12).unwrap(), 0.0);
    }

    #[test]
    fn norms_examples() {
        let n = norms(&DenseMatrix::identity(2)).unwrap();
        assert!(close(n.fro, 2f64.sqrt(), 1e-14));
        assert_eq!(n.inf, 1.0);
        assert!(close(n.nuclear, 2.0, 1e-12));

        let s = 1.0 / 2f64.sqrt();
        let n = norms(&DenseMatrix::outer(&[s, s], &[0.6, 0.0, 0.8])).unwrap();
        assert!(close(n.fro, 1.0, 1e-14));
        assert!(close(n.nuclear, 1.0, 1e-12));
    }

    #[test]
    fn matmul_and_transpose() {
        let a = DenseMatrix::from_rows(&[&[1.0, 2.0], &[3.0, 4.0], &[5.0, 6.0]]).unwrap();
        let b = DenseMatrix::from_rows(&[&[1.0, 0.0, -1.0], &[2.0, 1.0, 0.0]]).unwrap();
        let c = a.matmul(&b);
        assert_eq!(c.row(0), &[5.0, 2.0, -1.0]);
        assert_eq!(c.row(2), &[17.0, 6.0, -5.0]);
        assert_eq!(a.transpose().row(1), &[2.0, 4.0, 6.0]);
    }

    #[test]
    fn center_rows_zeroes_row_sums() {
        let mut a = DenseMatrix::from_rows(&[&[1.0, 2.0, 6.0], &[-3.0, 0.0, 0.0]]).unwrap();
        a.center_rows();
        for s in a.row_sums() {
            assert!(s.abs() < 1e-14);
        }
    }

    #[test]
    fn rank_deficient_input_is_reproduced() {
        // Nearly tied top pair with a rank-2 structure: refactoring must not drift.
        let u = DenseMatrix::from_fn(6, 2, |i, j| ((i * 7 + j * 3) % 5) as f64 - 2.0);
        let v = DenseMatrix::from_fn(2, 5, |i, j| ((i * 2 + j * 5) % 7) as f64 - 3.0);
        let x = u.matmul(&v);
        let svd = svd_full(&x).unwrap();
        assert!((&svd.reconstruct() - &x).fro_norm() <= 1e-12 * x.fro_norm());
        let gram = svd.left.transpose().matmul(&svd.left);
        assert!((&gram - &DenseMatrix::identity(5)).fro_norm() < 1e-12);
        let again = svd_top_r(&x, 2, SVD_TOL).unwrap().reconstruct();
        assert!((&again - &x).fro_norm() <= 1e-12 * x.fro_norm());
    }

    #[test]
    fn zero_matrix_has_orthonormal_factors() {
        let svd = svd_full(&DenseMatrix::zeros(4, 3)).unwrap();
        assert_eq!(svd.singvals, vec![0.0; 3]);
        let gram = svd.left.transpose().matmul(&svd.left);
        assert!((&gram - &DenseMatrix::identity(3)).fro_norm() < 1e-12);
    }
}
