//! Row-major dense matrices and the handful of dense kernels the solvers need.

use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{} values for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix whose `j`-th column is `columns[j]`.
    pub fn from_columns(rows: usize, columns: &[Vec<f64>]) -> Result<Self> {
        let mut m = Self::zeros(rows, columns.len());
        for (j, c) in columns.iter().enumerate() {
            if c.len() != rows {
                return Err(Error::DimensionMismatch(format!("column {j} has length {}", c.len())));
            }
            for (i, &v) in c.iter().enumerate() {
                m.data[i * m.cols + j] = v;
            }
        }
        Ok(m)
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.data[i * self.cols + j]).collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} times vector of length {}",
                self.rows, self.cols, x.len()
            )));
        }
        Ok((0..self.rows).map(|i| dot(self.row(i), x)).collect())
    }

    pub fn matmul(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} times {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = DenseMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let orow = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == 0.0 {
                    continue;
                }
                for (o, &b) in orow.iter_mut().zip(other.row(k)) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn sub(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if (self.rows, self.cols) != (other.rows, other.cols) {
            return Err(Error::DimensionMismatch("difference of unequal shapes".into()));
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Ok(DenseMatrix { rows: self.rows, cols: self.cols, data })
    }

    pub fn norm_frobenius(&self) -> f64 {
        norm2(&self.data)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Writes `block` with its top-left corner at `(r0, c0)`.
    pub fn set_block(&mut self, r0: usize, c0: usize, block: &DenseMatrix) {
        for i in 0..block.rows {
            let dst = &mut self.data[(r0 + i) * self.cols + c0..(r0 + i) * self.cols + c0 + block.cols];
            dst.copy_from_slice(block.row(i));
        }
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    // scaled to avoid overflow on extreme inputs
    let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 || !scale.is_finite() {
        return scale;
    }
    scale * a.iter().map(|v| (v / scale) * (v / scale)).sum::<f64>().sqrt()
}

/// `y += alpha * x`.
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Dense Cholesky `M = L Lᵀ`, returning the lower factor.
pub fn chol_dense(m: &DenseMatrix) -> Result<DenseMatrix> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(Error::DimensionMismatch("Cholesky of a non-square matrix".into()));
    }
    let mut l = DenseMatrix::zeros(n, n);
    for j in 0..n {
        let lj = l.row(j)[..j].to_vec();
        let d = m[(j, j)] - dot(&lj, &lj);
        if !(d > 0.0) || !d.is_finite() {
            return Err(Error::NotPositiveDefinite { index: j, pivot: d });
        }
        let djj = d.sqrt();
        l[(j, j)] = djj;
        for i in j + 1..n {
            let s = m[(i, j)] - dot(&l.row(i)[..j], &lj);
            l[(i, j)] = s / djj;
        }
    }
    Ok(l)
}

/// Solves `L Lᵀ x = b` with a dense lower factor.
pub fn chol_solve(l: &DenseMatrix, b: &[f64]) -> Vec<f64> {
    let n = l.nrows();
    let mut x = b.to_vec();
    for i in 0..n {
        let s = dot(&l.row(i)[..i], &x[..i]);
        x[i] = (x[i] - s) / l[(i, i)];
    }
    for i in (0..n).rev() {
        let xi = x[i] / l[(i, i)];
        x[i] = xi;
        for k in 0..i {
            x[k] -= l[(i, k)] * xi;
        }
    }
    x
}

/// LU with partial pivoting; returns the packed factors and the row permutation.
pub fn lu_factor(m: &DenseMatrix) -> Result<(DenseMatrix, Vec<usize>)> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(Error::DimensionMismatch("LU of a non-square matrix".into()));
    }
    let mut a = m.clone();
    let mut perm: Vec<usize> = (0..n).collect();
    for k in 0..n {
        let (piv, pmax) = (k..n)
            .map(|i| (i, a[(i, k)].abs()))
            .fold((k, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if pmax == 0.0 {
            return Err(Error::SingularFactor { row: k });
        }
        if piv != k {
            for j in 0..n {
                a.data.swap(k * n + j, piv * n + j);
            }
            perm.swap(k, piv);
        }
        let akk = a[(k, k)];
        for i in k + 1..n {
            let f = a[(i, k)] / akk;
            a[(i, k)] = f;
            if f != 0.0 {
                for j in k + 1..n {
                    let v = a[(k, j)];
                    a[(i, j)] -= f * v;
                }
            }
        }
    }
    Ok((a, perm))
}

pub fn lu_solve(lu: &DenseMatrix, perm: &[usize], b: &[f64]) -> Vec<f64> {
    let n = lu.nrows();
    let mut x: Vec<f64> = perm.iter().map(|&p| b[p]).collect();
    for i in 0..n {
        let s = dot(&lu.row(i)[..i], &x[..i]);
        x[i] -= s;
    }
    for i in (0..n).rev() {
        let s = dot(&lu.row(i)[i + 1..], &x[i + 1..]);
        x[i] = (x[i] - s) / lu[(i, i)];
    }
    x
}

/// Dense inverse through LU; used by oracles and small exact constructions.
pub fn inverse(m: &DenseMatrix) -> Result<DenseMatrix> {
    let n = m.nrows();
    let (lu, perm) = lu_factor(m)?;
    let mut cols = Vec::with_capacity(n);
    let mut e = vec![0.0; n];
    for j in 0..n {
        e[j] = 1.0;
        cols.push(lu_solve(&lu, &perm, &e));
        e[j] = 0.0;
    }
    DenseMatrix::from_columns(n, &cols)
}

/// Numerical rank by Gaussian elimination with complete pivoting.
pub fn rank(m: &DenseMatrix, rel_tol: f64) -> usize {
    let mut a = m.clone();
    let (r, c) = (a.rows, a.cols);
    let tol = rel_tol * m.max_abs().max(f64::MIN_POSITIVE);
    let mut rank = 0;
    let mut rows: Vec<usize> = (0..r).collect();
    let mut cols: Vec<usize> = (0..c).collect();
    while rank < r.min(c) {
        let mut best = (0, 0, 0.0f64);
        for (ii, &i) in rows.iter().enumerate().skip(rank) {
            for (jj, &j) in cols.iter().enumerate().skip(rank) {
                let v = a[(i, j)].abs();
                if v > best.2 {
                    best = (ii, jj, v);
                }
            }
        }
        if best.2 <= tol {
            break;
        }
        rows.swap(rank, best.0);
        cols.swap(rank, best.1);
        let (pi, pj) = (rows[rank], cols[rank]);
        let pv = a[(pi, pj)];
        for &i in &rows[rank + 1..] {
            let f = a[(i, pj)] / pv;
            if f != 0.0 {
                for &j in &cols[rank..] {
                    let v = a[(pi, j)];
                    a[(i, j)] -= f * v;
                }
            }
        }
        rank += 1;
    }
    rank
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chol_dense_diagonal_and_identity() {
        let m = DenseMatrix::from_fn(3, 3, |i, j| if i == j { ((i + 1) * (i + 1)) as f64 } else { 0.0 });
        let l = chol_dense(&m).unwrap();
        assert_eq!(l, DenseMatrix::from_fn(3, 3, |i, j| if i == j { (i + 1) as f64 } else { 0.0 }));
        assert_eq!(chol_dense(&DenseMatrix::identity(4)).unwrap(), DenseMatrix::identity(4));
    }

    #[test]
    fn chol_dense_rejects_indefinite() {
        let m = DenseMatrix::from_row_major(2, 2, vec![1.0, 2.0, 2.0, 1.0]).unwrap();
        assert!(matches!(chol_dense(&m), Err(Error::NotPositiveDefinite { index: 1, .. })));
    }

    #[test]
    fn lu_inverse_roundtrip() {
        let m = DenseMatrix::from_fn(5, 5, |i, j| 1.0 / (1.0 + i as f64 + j as f64) + if i == j { 1.0 } else { 0.0 });
        let inv = inverse(&m).unwrap();
        let prod = m.matmul(&inv).unwrap();
        assert!(prod.sub(&DenseMatrix::identity(5)).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn rank_detects_deficiency() {
        let m = DenseMatrix::from_fn(4, 5, |i, j| ((i + 1) * (j + 1)) as f64);
        assert_eq!(rank(&m, 1e-12), 1);
        assert_eq!(rank(&DenseMatrix::identity(3), 1e-12), 3);
    }

    #[test]
    fn norm2_handles_large_values() {
        assert!((norm2(&[3e200, 4e200]) / 5e200 - 1.0).abs() < 1e-15);
        assert_eq!(norm2(&[]), 0.0);
    }
}
