//! Dense helpers for small matrices and an envelope Cholesky for the large
//! sparse covariance.  Nothing here is tuned beyond what the covariance
//! structure needs: the permuted matrix is near-banded, so a profile
//! factorization with per-row envelopes is the whole story.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{CoreError, Result};
#[allow(unused_imports)]
use num_traits::Float;

// ---------------------------------------------------------------------------
// Small dense matrices (row-major)
// ---------------------------------------------------------------------------

/// Row-major dense matrix for small problems (information matrices, the
/// quadratic-form moment oracle, test fixtures).
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let r = rows.len();
        let c = if r == 0 { 0 } else { rows[0].len() };
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Mat { rows: r, cols: c, data }
    }

    pub fn mul(&self, other: &Mat) -> Mat {
        assert_eq!(self.cols, other.rows, "inner dimensions differ");
        let mut out = Mat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn trace(&self) -> f64 {
        debug_assert_eq!(self.rows, self.cols);
        (0..self.rows).map(|i| self[(i, i)]).sum()
    }

    pub fn transpose(&self) -> Mat {
        let mut out = Mat::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(j, i)] = self[(i, j)];
            }
        }
        out
    }

    /// Force exact symmetry by averaging off-diagonal pairs.
    pub fn symmetrize(&mut self) {
        debug_assert_eq!(self.rows, self.cols);
        for i in 0..self.rows {
            for j in 0..i {
                let v = 0.5 * (self[(i, j)] + self[(j, i)]);
                self[(i, j)] = v;
                self[(j, i)] = v;
            }
        }
    }

    pub fn max_abs_asymmetry(&self) -> f64 {
        let mut worst = 0.0_f64;
        for i in 0..self.rows {
            for j in 0..i {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }
}

impl core::ops::Index<(usize, usize)> for Mat {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl core::ops::IndexMut<(usize, usize)> for Mat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Dense Cholesky (lower factor) for small symmetric positive definite input.
pub fn cholesky_dense(a: &Mat) -> Result<Mat> {
    assert_eq!(a.rows, a.cols);
    let n = a.rows;
    let mut l = Mat::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            if i == j {
                if s <= 0.0 {
                    return Err(CoreError::NotPositiveDefinite { pivot: i });
                }
                l[(i, i)] = s.sqrt();
            } else {
                l[(i, j)] = s / l[(j, j)];
            }
        }
    }
    Ok(l)
}

/// Solve A x = b for symmetric positive definite A via dense Cholesky.
pub fn solve_spd(a: &Mat, b: &[f64]) -> Result<Vec<f64>> {
    let l = cholesky_dense(a)?;
    let n = a.rows;
    assert_eq!(b.len(), n);
    let mut x = b.to_vec();
    for i in 0..n {
        for k in 0..i {
            x[i] -= l[(i, k)] * x[k];
        }
        x[i] /= l[(i, i)];
    }
    for i in (0..n).rev() {
        x[i] /= l[(i, i)];
        let xi = x[i];
        for k in 0..i {
            x[k] -= l[(i, k)] * xi;
        }
    }
    Ok(x)
}

/// Inverse of a small symmetric positive definite matrix.
pub fn inverse_spd(a: &Mat) -> Result<Mat> {
    let n = a.rows;
    let mut inv = Mat::zeros(n, n);
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        let col = solve_spd(a, &e)?;
        for i in 0..n {
            inv[(i, j)] = col[i];
        }
    }
    inv.symmetrize();
    Ok(inv)
}

/// Eigenvalues and eigenvectors of a small symmetric matrix via cyclic Jacobi
/// rotations.  Returns (eigenvalues, matrix whose columns are eigenvectors).
pub fn sym_eigen(a: &Mat) -> (Vec<f64>, Mat) {
    assert_eq!(a.rows, a.cols);
    let n = a.rows;
    let mut m = a.clone();
    m.symmetrize();
    let mut v = Mat::identity(n);
    for _sweep in 0..100 {
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += m[(i, j)] * m[(i, j)];
            }
        }
        if off <= 1e-30 * (1.0 + m.trace().abs()) {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (1.0 + theta * theta).sqrt())
                } else {
                    -1.0 / (-theta + (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let eig = (0..n).map(|i| m[(i, i)]).collect();
    (eig, v)
}

/// Smallest eigenvalue of a small symmetric matrix.
pub fn min_eigenvalue(a: &Mat) -> f64 {
    let (eig, _) = sym_eigen(a);
    eig.iter().fold(f64::INFINITY, |m, &x| m.min(x))
}

/// Symmetric inverse square root A^{-1/2} of a positive definite matrix.
pub fn inv_sqrt_spd(a: &Mat) -> Result<Mat> {
    let (eig, u) = sym_eigen(a);
    let n = a.rows;
    if let Some(&bad) = eig.iter().find(|&&l| l <= 0.0) {
        return Err(CoreError::IdentifiabilityFailure { eigenvalue: bad });
    }
    let mut out = Mat::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let mut s = 0.0;
            for k in 0..n {
                s += u[(i, k)] * u[(j, k)] / eig[k].sqrt();
            }
            out[(i, j)] = s;
        }
    }
    out.symmetrize();
    Ok(out)
}

/// Symmetric square root A^{1/2} of a positive definite matrix.
pub fn sqrt_spd(a: &Mat) -> Result<Mat> {
    let (eig, u) = sym_eigen(a);
    let n = a.rows;
    if let Some(&bad) = eig.iter().find(|&&l| l <= 0.0) {
        return Err(CoreError::IdentifiabilityFailure { eigenvalue: bad });
    }
    let mut out = Mat::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let mut s = 0.0;
            for k in 0..n {
                s += u[(i, k)] * u[(j, k)] * eig[k].sqrt();
            }
            out[(i, j)] = s;
        }
    }
    out.symmetrize();
    Ok(out)
}

// ---------------------------------------------------------------------------
// Envelope (profile) Cholesky for the sparse covariance
// ---------------------------------------------------------------------------

/// Lower-triangular profile factor.  Row `r` stores entries for columns
/// `first[r] ..= r`; Cholesky fill never leaves the envelope, so this is
/// exact for any symmetric positive definite input expressed in profile form.
#[derive(Debug, Clone)]
pub struct EnvelopeFactor {
    n: usize,
    first: Vec<usize>,
    offset: Vec<usize>,
    store: Vec<f64>,
}

impl EnvelopeFactor {
    /// Factor a symmetric positive definite matrix given in profile form:
    /// `first[r]` is the first structurally nonzero column of row `r`
    /// (`first[r] <= r`) and `row_of(r)` yields the dense slice of row `r`
    /// covering columns `first[r] ..= r`.
    pub fn factor(first: Vec<usize>, rows: &[Vec<f64>]) -> Result<Self> {
        let n = first.len();
        assert_eq!(rows.len(), n);
        let mut offset = Vec::with_capacity(n + 1);
        offset.push(0);
        for r in 0..n {
            debug_assert!(first[r] <= r);
            debug_assert_eq!(rows[r].len(), r - first[r] + 1);
            offset.push(offset[r] + (r - first[r] + 1));
        }
        let mut store = Vec::with_capacity(offset[n]);
        for row in rows {
            store.extend_from_slice(row);
        }
        let mut f = EnvelopeFactor {
            n,
            first,
            offset,
            store,
        };
        f.factor_in_place()?;
        Ok(f)
    }

    fn at(&self, r: usize, c: usize) -> f64 {
        self.store[self.offset[r] + (c - self.first[r])]
    }

    fn factor_in_place(&mut self) -> Result<()> {
        for r in 0..self.n {
            let fr = self.first[r];
            for c in fr..r {
                let fc = self.first[c];
                let lo = fr.max(fc);
                let mut s = self.at(r, c);
                for k in lo..c {
                    s -= self.at(r, k) * self.at(c, k);
                }
                let d = self.at(c, c);
                let idx = self.offset[r] + (c - fr);
                self.store[idx] = s / d;
            }
            let mut s = self.at(r, r);
            for k in fr..r {
                let v = self.at(r, k);
                s -= v * v;
            }
            if !(s > 0.0) || !s.is_finite() {
                return Err(CoreError::NotPositiveDefinite { pivot: r });
            }
            let idx = self.offset[r] + (r - fr);
            self.store[idx] = s.sqrt();
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// 2 * sum(log diag(L)) = log det of the factored matrix.
    pub fn log_det(&self) -> f64 {
        (0..self.n).map(|r| 2.0 * self.at(r, r).ln()).sum()
    }

    /// Solve L z = y in place.
    pub fn solve_lower(&self, y: &mut [f64]) {
        assert_eq!(y.len(), self.n);
        for r in 0..self.n {
            let fr = self.first[r];
            let mut s = y[r];
            for c in fr..r {
                s -= self.at(r, c) * y[c];
            }
            y[r] = s / self.at(r, r);
        }
    }

    /// Solve L^T x = y in place.
    pub fn solve_upper(&self, y: &mut [f64]) {
        assert_eq!(y.len(), self.n);
        for r in (0..self.n).rev() {
            y[r] /= self.at(r, r);
            let xr = y[r];
            let fr = self.first[r];
            for c in fr..r {
                y[c] -= self.at(r, c) * xr;
            }
        }
    }

    /// z = L v (used to push standard normals through the factor).
    pub fn mul_lower(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.n);
        let mut z = vec![0.0; self.n];
        for r in 0..self.n {
            let fr = self.first[r];
            let mut s = 0.0;
            for c in fr..=r {
                s += self.at(r, c) * v[c];
            }
            z[r] = s;
        }
        z
    }

    /// Envelope size (stored entries); diagnostic only.
    pub fn stored_entries(&self) -> usize {
        self.store.len()
    }
}

// ---------------------------------------------------------------------------
// CSR sparse matrix (rectangular, used for the overlap matrix G)
// ---------------------------------------------------------------------------

/// Compressed sparse rows with an eagerly built transpose, sized for the
/// M1 x M2 overlap matrix.  Row and column indices are kept in increasing
/// order, which the two-pointer overlap sweep guarantees.
#[derive(Debug, Clone)]
pub struct Csr {
    pub nrows: usize,
    pub ncols: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<u32>,
    pub values: Vec<f64>,
    pub col_ptr: Vec<usize>,
    pub row_idx: Vec<u32>,
    pub values_t: Vec<f64>,
}

impl Csr {
    /// Build from triplets that are sorted by (row, col).
    pub fn from_sorted_triplets(
        nrows: usize,
        ncols: usize,
        triplets: &[(u32, u32, f64)],
    ) -> Self {
        let nnz = triplets.len();
        let mut row_ptr = vec![0usize; nrows + 1];
        let mut col_idx = Vec::with_capacity(nnz);
        let mut values = Vec::with_capacity(nnz);
        for &(i, j, v) in triplets {
            row_ptr[i as usize + 1] += 1;
            col_idx.push(j);
            values.push(v);
        }
        for r in 0..nrows {
            row_ptr[r + 1] += row_ptr[r];
        }
        // transpose by counting sort over columns
        let mut col_ptr = vec![0usize; ncols + 1];
        for &(_, j, _) in triplets {
            col_ptr[j as usize + 1] += 1;
        }
        for c in 0..ncols {
            col_ptr[c + 1] += col_ptr[c];
        }
        let mut row_idx = vec![0u32; nnz];
        let mut values_t = vec![0.0; nnz];
        let mut cursor = col_ptr.clone();
        for &(i, j, v) in triplets {
            let p = cursor[j as usize];
            row_idx[p] = i;
            values_t[p] = v;
            cursor[j as usize] += 1;
        }
        Csr {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
            col_ptr,
            row_idx,
            values_t,
        }
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, r: usize) -> (&[u32], &[f64]) {
        let a = self.row_ptr[r];
        let b = self.row_ptr[r + 1];
        (&self.col_idx[a..b], &self.values[a..b])
    }

    pub fn col(&self, c: usize) -> (&[u32], &[f64]) {
        let a = self.col_ptr[c];
        let b = self.col_ptr[c + 1];
        (&self.row_idx[a..b], &self.values_t[a..b])
    }

    /// y = A x (length checks are the caller's job in hot paths).
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.ncols);
        debug_assert_eq!(y.len(), self.nrows);
        for r in 0..self.nrows {
            let (cols, vals) = self.row(r);
            let mut s = 0.0;
            for (c, v) in cols.iter().zip(vals) {
                s += v * x[*c as usize];
            }
            y[r] = s;
        }
    }

    /// y = A^T x.
    pub fn matvec_t(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.nrows);
        debug_assert_eq!(y.len(), self.ncols);
        for c in 0..self.ncols {
            let (rows, vals) = self.col(c);
            let mut s = 0.0;
            for (r, v) in rows.iter().zip(vals) {
                s += v * x[*r as usize];
            }
            y[c] = s;
        }
    }
}

/// Diagonals of (W W^T)^p for p = 1..=p_max, where W is a sparse nonnegative
/// rectangular matrix whose rows/columns are ordered by time so that nonzero
/// extents are monotone.  Column k of the power is grown from e_k by repeated
/// W (W^T .) products restricted to the active index range; nothing is ever
/// densified.  Returns `d` with `d[p - 1][i] = [(W W^T)^p]_{ii}`.
pub fn sym_power_diagonals(w: &Csr, p_max: usize) -> Vec<Vec<f64>> {
    let m1 = w.nrows;
    let m2 = w.ncols;
    let row_first: Vec<usize> = (0..m1).map(|r| w.row(r).0[0] as usize).collect();
    let row_last: Vec<usize> = (0..m1)
        .map(|r| *w.row(r).0.last().unwrap() as usize)
        .collect();
    let col_first: Vec<usize> = (0..m2).map(|c| w.col(c).0[0] as usize).collect();
    let col_last: Vec<usize> = (0..m2)
        .map(|c| *w.col(c).0.last().unwrap() as usize)
        .collect();

    let mut d = vec![vec![0.0; m1]; p_max];
    let mut v = vec![0.0; m1];
    let mut v2 = vec![0.0; m1];
    let mut wbuf = vec![0.0; m2];

    for i in 0..m1 {
        v[i] = 1.0;
        let (mut rlo, mut rhi) = (i, i);
        for p in 1..=p_max {
            let clo = row_first[rlo];
            let chi = row_last[rhi];
            for c in clo..=chi {
                let (rows, vals) = w.col(c);
                let mut s = 0.0;
                for (r, x) in rows.iter().zip(vals) {
                    s += x * v[*r as usize];
                }
                wbuf[c] = s;
            }
            let nrlo = col_first[clo];
            let nrhi = col_last[chi];
            for r in nrlo..=nrhi {
                let (cols, vals) = w.row(r);
                let mut s = 0.0;
                for (c, x) in cols.iter().zip(vals) {
                    let cc = *c as usize;
                    if cc >= clo && cc <= chi {
                        s += x * wbuf[cc];
                    }
                }
                v2[r] = s;
            }
            for slot in &mut wbuf[clo..=chi] {
                *slot = 0.0;
            }
            for slot in &mut v[rlo..=rhi] {
                *slot = 0.0;
            }
            if i >= nrlo && i <= nrhi {
                d[p - 1][i] = v2[i];
            }
            core::mem::swap(&mut v, &mut v2);
            rlo = nrlo;
            rhi = nrhi;
        }
        for slot in &mut v[rlo..=rhi] {
            *slot = 0.0;
        }
    }
    d
}
