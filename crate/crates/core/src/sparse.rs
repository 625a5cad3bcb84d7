//! Compressed sparse row storage and the kernels built on it.
//!
//! Every [`SparseMatrix`] is kept in canonical form: column indices strictly
//! increasing inside a row, duplicates summed, and no explicitly stored zeros.
//! Two matrices holding the same values therefore compare equal with `==`.

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Builds a matrix from `(row, col, value)` triplets.
    ///
    /// Duplicate positions are summed and entries that end up exactly zero
    /// are removed.
    pub fn from_triplets(rows: usize, cols: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        rows.checked_mul(cols)
            .ok_or_else(|| Error::Overflow(format!("{rows} x {cols} matrix")))?;
        let mut counts = vec![0usize; rows + 1];
        for &(i, j, v) in triplets {
            if i >= rows || j >= cols {
                return Err(Error::InvalidStructure(format!(
                    "entry ({i}, {j}) outside {rows} x {cols}"
                )));
            }
            if !v.is_finite() {
                return Err(Error::NonFinite("triplet input"));
            }
            counts[i + 1] += 1;
        }
        for i in 0..rows {
            counts[i + 1] += counts[i];
        }
        let mut next = counts.clone();
        let mut cols_tmp = vec![0usize; triplets.len()];
        let mut vals_tmp = vec![0.0; triplets.len()];
        for &(i, j, v) in triplets {
            let slot = next[i];
            cols_tmp[slot] = j;
            vals_tmp[slot] = v;
            next[i] += 1;
        }

        let mut row_ptr = Vec::with_capacity(rows + 1);
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        row_ptr.push(0);
        let mut order: Vec<usize> = Vec::new();
        for i in 0..rows {
            let (lo, hi) = (counts[i], counts[i + 1]);
            order.clear();
            order.extend(lo..hi);
            order.sort_by_key(|&k| cols_tmp[k]);
            let mut k = 0;
            while k < order.len() {
                let col = cols_tmp[order[k]];
                let mut sum = 0.0;
                while k < order.len() && cols_tmp[order[k]] == col {
                    sum += vals_tmp[order[k]];
                    k += 1;
                }
                if sum != 0.0 {
                    col_idx.push(col);
                    values.push(sum);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Ok(Self { rows, cols, row_ptr, col_idx, values })
    }

    /// Builds a matrix from raw CSR arrays, validating the canonical-form invariants.
    pub fn from_csr(
        rows: usize,
        cols: usize,
        row_ptr: Vec<usize>,
        col_idx: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if row_ptr.len() != rows + 1 || row_ptr[0] != 0 {
            return Err(Error::InvalidStructure("row pointer length or origin".into()));
        }
        if col_idx.len() != values.len() || *row_ptr.last().unwrap() != col_idx.len() {
            return Err(Error::InvalidStructure("row pointer does not match entry count".into()));
        }
        for i in 0..rows {
            if row_ptr[i] > row_ptr[i + 1] {
                return Err(Error::InvalidStructure(format!("row pointer decreases at row {i}")));
            }
            let row = &col_idx[row_ptr[i]..row_ptr[i + 1]];
            for (k, &j) in row.iter().enumerate() {
                if j >= cols {
                    return Err(Error::InvalidStructure(format!("column {j} out of range in row {i}")));
                }
                if k > 0 && row[k - 1] >= j {
                    return Err(Error::InvalidStructure(format!("columns not increasing in row {i}")));
                }
            }
        }
        if let Some(pos) = values.iter().position(|v| *v == 0.0 || !v.is_finite()) {
            return Err(Error::InvalidStructure(format!("explicit zero or non-finite value at entry {pos}")));
        }
        Ok(Self { rows, cols, row_ptr, col_idx, values })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, row_ptr: vec![0; rows + 1], col_idx: Vec::new(), values: Vec::new() }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diagonal(&vec![1.0; n])
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::with_capacity(n);
        let mut values = Vec::with_capacity(n);
        row_ptr.push(0);
        for (i, &d) in diag.iter().enumerate() {
            if d != 0.0 {
                col_idx.push(i);
                values.push(d);
            }
            row_ptr.push(col_idx.len());
        }
        Self { rows: n, cols: n, row_ptr, col_idx, values }
    }

    pub fn from_dense(dense: &DenseMatrix) -> Self {
        let mut row_ptr = Vec::with_capacity(dense.nrows() + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for i in 0..dense.nrows() {
            for (j, &v) in dense.row(i).iter().enumerate() {
                if v != 0.0 {
                    col_idx.push(j);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Self { rows: dense.nrows(), cols: dense.ncols(), row_ptr, col_idx, values }
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (lo, hi) = (self.row_ptr[i], self.row_ptr[i + 1]);
        (&self.col_idx[lo..hi], &self.values[lo..hi])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(k) => vals[k],
            Err(_) => 0.0,
        }
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.rows).flat_map(move |i| {
            let (cols, vals) = self.row(i);
            cols.iter().zip(vals).map(move |(&j, &v)| (i, j, v))
        })
    }

    pub fn transpose(&self) -> Self {
        let mut counts = vec![0usize; self.cols + 1];
        for &j in &self.col_idx {
            counts[j + 1] += 1;
        }
        for j in 0..self.cols {
            counts[j + 1] += counts[j];
        }
        let mut next = counts.clone();
        let mut col_idx = vec![0usize; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        // Rows are visited in increasing order, so each output row stays sorted.
        for i in 0..self.rows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                col_idx[next[j]] = i;
                values[next[j]] = v;
                next[j] += 1;
            }
        }
        Self { rows: self.cols, cols: self.rows, row_ptr: counts, col_idx, values }
    }

    /// `M x` or `Mᵀ x`.
    pub fn spmv(&self, x: &[f64], transpose: bool) -> Result<Vec<f64>> {
        if transpose {
            if x.len() != self.rows {
                return Err(Error::DimensionMismatch(format!(
                    "transposed product of {}x{} with vector of length {}",
                    self.rows, self.cols, x.len()
                )));
            }
            let mut y = vec![0.0; self.cols];
            self.mul_transpose_acc(x, &mut y);
            Ok(y)
        } else {
            if x.len() != self.cols {
                return Err(Error::DimensionMismatch(format!(
                    "product of {}x{} with vector of length {}",
                    self.rows, self.cols, x.len()
                )));
            }
            let mut y = vec![0.0; self.rows];
            self.mul_into(x, &mut y);
            Ok(y)
        }
    }

    /// `y = M x` without allocation. Lengths are the caller's responsibility.
    pub fn mul_into(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(y.len(), self.rows);
        for (i, yi) in y.iter_mut().enumerate() {
            let (lo, hi) = (self.row_ptr[i], self.row_ptr[i + 1]);
            let mut acc = 0.0;
            for k in lo..hi {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            *yi = acc;
        }
    }

    /// `y += Mᵀ x`.
    pub fn mul_transpose_acc(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.rows);
        debug_assert_eq!(y.len(), self.cols);
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            let (lo, hi) = (self.row_ptr[i], self.row_ptr[i + 1]);
            for k in lo..hi {
                y[self.col_idx[k]] += self.values[k] * xi;
            }
        }
    }

    /// Sparse product `self * other` (row-wise Gustavson).
    pub fn matmul(&self, other: &SparseMatrix) -> Result<SparseMatrix> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch(format!(
                "product of {}x{} and {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut acc = vec![0.0; other.cols];
        let mut marker = vec![usize::MAX; other.cols];
        let mut pattern: Vec<usize> = Vec::new();
        let mut row_ptr = Vec::with_capacity(self.rows + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for i in 0..self.rows {
            pattern.clear();
            let (acols, avals) = self.row(i);
            for (&k, &a) in acols.iter().zip(avals) {
                let (bcols, bvals) = other.row(k);
                for (&j, &b) in bcols.iter().zip(bvals) {
                    if marker[j] != i {
                        marker[j] = i;
                        acc[j] = 0.0;
                        pattern.push(j);
                    }
                    acc[j] += a * b;
                }
            }
            pattern.sort_unstable();
            for &j in &pattern {
                if acc[j] != 0.0 {
                    col_idx.push(j);
                    values.push(acc[j]);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Ok(SparseMatrix { rows: self.rows, cols: other.cols, row_ptr, col_idx, values })
    }

    /// `diag(d) * self`.
    pub fn scale_rows(&self, d: &[f64]) -> Result<SparseMatrix> {
        if d.len() != self.rows {
            return Err(Error::DimensionMismatch("row scaling length".into()));
        }
        let mut out = self.clone();
        for i in 0..self.rows {
            for k in out.row_ptr[i]..out.row_ptr[i + 1] {
                out.values[k] *= d[i];
            }
        }
        out.drop_zeros();
        Ok(out)
    }

    /// `self * diag(d)`.
    pub fn scale_cols(&self, d: &[f64]) -> Result<SparseMatrix> {
        if d.len() != self.cols {
            return Err(Error::DimensionMismatch("column scaling length".into()));
        }
        let mut out = self.clone();
        for k in 0..out.values.len() {
            out.values[k] *= d[out.col_idx[k]];
        }
        out.drop_zeros();
        Ok(out)
    }

    /// `alpha * self + beta * other`.
    pub fn add(&self, alpha: f64, other: &SparseMatrix, beta: f64) -> Result<SparseMatrix> {
        if self.shape() != other.shape() {
            return Err(Error::DimensionMismatch(format!(
                "sum of {:?} and {:?}",
                self.shape(),
                other.shape()
            )));
        }
        let mut triplets: Vec<(usize, usize, f64)> = Vec::with_capacity(self.nnz() + other.nnz());
        triplets.extend(self.triplets().map(|(i, j, v)| (i, j, alpha * v)));
        triplets.extend(other.triplets().map(|(i, j, v)| (i, j, beta * v)));
        SparseMatrix::from_triplets(self.rows, self.cols, &triplets)
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.rows.min(self.cols)).map(|i| self.get(i, i)).collect()
    }

    /// Entries with `-lower <= j - i <= upper`; `band(1, 1)` is the tridiagonal part.
    pub fn band(&self, lower: usize, upper: usize) -> SparseMatrix {
        let triplets: Vec<_> = self
            .triplets()
            .filter(|&(i, j, _)| j + lower >= i && j <= i + upper)
            .collect();
        SparseMatrix::from_triplets(self.rows, self.cols, &triplets).expect("band of a valid matrix")
    }

    pub fn is_lower_triangular(&self) -> bool {
        self.triplets().all(|(i, j, _)| j <= i)
    }

    pub fn is_upper_triangular(&self) -> bool {
        self.triplets().all(|(i, j, _)| j >= i)
    }

    /// Largest `|M - Mᵀ|` entry.
    pub fn asymmetry(&self) -> f64 {
        if self.rows != self.cols {
            return f64::INFINITY;
        }
        let t = self.transpose();
        self.add(1.0, &t, -1.0)
            .map(|d| d.values.iter().fold(0.0f64, |m, v| m.max(v.abs())))
            .unwrap_or(f64::INFINITY)
    }

    pub fn norm_frobenius(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.rows)
            .map(|i| self.row(i).1.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Euclidean norm of each column.
    pub fn column_norms(&self) -> Vec<f64> {
        let mut sq = vec![0.0; self.cols];
        for (&j, &v) in self.col_idx.iter().zip(&self.values) {
            sq[j] += v * v;
        }
        sq.into_iter().map(f64::sqrt).collect()
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut d = DenseMatrix::zeros(self.rows, self.cols);
        for (i, j, v) in self.triplets() {
            d[(i, j)] = v;
        }
        d
    }

    /// Places sparse blocks on a block grid with the given row and column partition.
    ///
    /// Missing blocks are zero; each block's shape must match its slot.
    pub fn block(
        row_sizes: &[usize],
        col_sizes: &[usize],
        blocks: &[(usize, usize, &SparseMatrix)],
    ) -> Result<SparseMatrix> {
        let offsets = |sizes: &[usize]| -> Result<Vec<usize>> {
            let mut off = Vec::with_capacity(sizes.len() + 1);
            off.push(0usize);
            for &s in sizes {
                let next = off.last().unwrap().checked_add(s).ok_or_else(|| {
                    Error::Overflow("block partition exceeds index range".into())
                })?;
                off.push(next);
            }
            Ok(off)
        };
        let roff = offsets(row_sizes)?;
        let coff = offsets(col_sizes)?;
        let mut triplets = Vec::new();
        for &(bi, bj, m) in blocks {
            if bi >= row_sizes.len() || bj >= col_sizes.len() {
                return Err(Error::InvalidArgument(format!("block ({bi}, {bj}) outside the grid")));
            }
            if m.shape() != (row_sizes[bi], col_sizes[bj]) {
                return Err(Error::DimensionMismatch(format!(
                    "block ({bi}, {bj}) is {:?}, slot is {}x{}",
                    m.shape(),
                    row_sizes[bi],
                    col_sizes[bj]
                )));
            }
            triplets.extend(m.triplets().map(|(i, j, v)| (i + roff[bi], j + coff[bj], v)));
        }
        SparseMatrix::from_triplets(*roff.last().unwrap(), *coff.last().unwrap(), &triplets)
    }

    fn drop_zeros(&mut self) {
        if self.values.iter().all(|&v| v != 0.0) {
            return;
        }
        let mut row_ptr = Vec::with_capacity(self.rows + 1);
        let mut col_idx = Vec::with_capacity(self.nnz());
        let mut values = Vec::with_capacity(self.nnz());
        row_ptr.push(0);
        for i in 0..self.rows {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                if self.values[k] != 0.0 {
                    col_idx.push(self.col_idx[k]);
                    values.push(self.values[k]);
                }
            }
            row_ptr.push(col_idx.len());
        }
        self.row_ptr = row_ptr;
        self.col_idx = col_idx;
        self.values = values;
    }
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &SparseMatrix, b: &SparseMatrix) -> Result<SparseMatrix> {
    if a.rows == 0 || a.cols == 0 || b.rows == 0 || b.cols == 0 {
        return Err(Error::InvalidArgument("Kronecker factors must be non-empty".into()));
    }
    let overflow = || Error::Overflow(format!("kron of {:?} and {:?}", a.shape(), b.shape()));
    let rows = a.rows.checked_mul(b.rows).ok_or_else(overflow)?;
    let cols = a.cols.checked_mul(b.cols).ok_or_else(overflow)?;
    let nnz = a.nnz().checked_mul(b.nnz()).ok_or_else(overflow)?;
    rows.checked_mul(cols).ok_or_else(overflow)?;

    let mut row_ptr = Vec::with_capacity(rows + 1);
    let mut col_idx = Vec::with_capacity(nnz);
    let mut values = Vec::with_capacity(nnz);
    row_ptr.push(0);
    for i in 0..a.rows {
        let (acols, avals) = a.row(i);
        for k in 0..b.rows {
            let (bcols, bvals) = b.row(k);
            // Increasing (j, l) gives increasing j * b.cols + l.
            for (&j, &av) in acols.iter().zip(avals) {
                for (&l, &bv) in bcols.iter().zip(bvals) {
                    let v = av * bv;
                    if v != 0.0 {
                        col_idx.push(j * b.cols + l);
                        values.push(v);
                    }
                }
            }
            row_ptr.push(col_idx.len());
        }
    }
    Ok(SparseMatrix { rows, cols, row_ptr, col_idx, values })
}

/// Which triangle of the factor is used and whether it is transposed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TriangularMode {
    /// `L x = b` with `L` lower triangular.
    Lower,
    /// `U x = b` with `U` upper triangular.
    Upper,
    /// `Lᵀ x = b` with `L` lower triangular.
    LowerTranspose,
}

/// Forward or backward substitution with a sparse triangular matrix.
///
/// Entries outside the relevant triangle are ignored. A zero or subnormal
/// diagonal entry is reported as [`Error::SingularFactor`].
pub fn triangular_solve(l: &SparseMatrix, b: &[f64], mode: TriangularMode) -> Result<Vec<f64>> {
    if l.rows != l.cols || b.len() != l.rows {
        return Err(Error::DimensionMismatch(format!(
            "triangular solve with {:?} and rhs of length {}",
            l.shape(),
            b.len()
        )));
    }
    let mut x = b.to_vec();
    triangular_solve_in_place(l, &mut x, mode)?;
    Ok(x)
}

pub(crate) fn triangular_solve_in_place(l: &SparseMatrix, x: &mut [f64], mode: TriangularMode) -> Result<()> {
    let n = l.rows;
    let check = |d: f64, row: usize| -> Result<f64> {
        if d == 0.0 || !d.is_normal() {
            Err(Error::SingularFactor { row })
        } else {
            Ok(d)
        }
    };
    match mode {
        TriangularMode::Lower => {
            for i in 0..n {
                let (cols, vals) = l.row(i);
                let mut acc = x[i];
                let mut diag = 0.0;
                for (&j, &v) in cols.iter().zip(vals) {
                    if j < i {
                        acc -= v * x[j];
                    } else if j == i {
                        diag = v;
                    }
                }
                x[i] = acc / check(diag, i)?;
            }
        }
        TriangularMode::Upper => {
            for i in (0..n).rev() {
                let (cols, vals) = l.row(i);
                let mut acc = x[i];
                let mut diag = 0.0;
                for (&j, &v) in cols.iter().zip(vals) {
                    if j > i {
                        acc -= v * x[j];
                    } else if j == i {
                        diag = v;
                    }
                }
                x[i] = acc / check(diag, i)?;
            }
        }
        TriangularMode::LowerTranspose => {
            for i in (0..n).rev() {
                let (cols, vals) = l.row(i);
                let diag = match cols.binary_search(&i) {
                    Ok(k) => vals[k],
                    Err(_) => 0.0,
                };
                let xi = x[i] / check(diag, i)?;
                x[i] = xi;
                for (&j, &v) in cols.iter().zip(vals) {
                    if j < i {
                        x[j] -= v * xi;
                    }
                }
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e1(p: usize) -> SparseMatrix {
        let mut t = Vec::new();
        for k in 0..p {
            t.push((k, k, 2.0));
            t.push((k, k + 1, -1.0));
        }
        SparseMatrix::from_triplets(p, p + 1, &t).unwrap()
    }

    #[test]
    fn canonicalization_sums_duplicates_and_drops_zeros() {
        let m = SparseMatrix::from_triplets(2, 2, &[(0, 1, 1.0), (0, 1, 2.0), (1, 0, 1.0), (1, 0, -1.0)]).unwrap();
        assert_eq!(m.nnz(), 1);
        assert_eq!(m.get(0, 1), 3.0);
        assert_eq!(m.get(1, 0), 0.0);
    }

    #[test]
    fn rejects_out_of_range_triplets() {
        assert!(SparseMatrix::from_triplets(2, 2, &[(2, 0, 1.0)]).is_err());
        assert!(SparseMatrix::from_csr(1, 2, vec![0, 2], vec![1, 0], vec![1.0, 1.0]).is_err());
        assert!(SparseMatrix::from_csr(1, 2, vec![0, 1], vec![0], vec![0.0]).is_err());
    }

    #[test]
    fn spmv_identity_and_e1_row_sums() {
        let i2 = SparseMatrix::identity(2);
        assert_eq!(i2.spmv(&[3.0, -1.0], false).unwrap(), vec![3.0, -1.0]);
        assert_eq!(e1(2).spmv(&[1.0, 1.0, 1.0], false).unwrap(), vec![1.0, 1.0]);
        assert!(e1(2).spmv(&[1.0, 1.0], false).is_err());
        assert!(e1(2).spmv(&[1.0, 1.0, 1.0], true).is_err());
    }

    #[test]
    fn kron_small_cases() {
        let i6 = kron(&SparseMatrix::identity(2), &SparseMatrix::identity(3)).unwrap();
        assert_eq!(i6, SparseMatrix::identity(6));

        let k = kron(&e1(2), &SparseMatrix::identity(2)).unwrap();
        assert_eq!(k.shape(), (4, 6));
        assert_eq!(k.nnz(), 8);
        assert!(k.values().iter().all(|&v| v == 2.0 || v == -1.0));

        let row = SparseMatrix::from_triplets(1, 2, &[(0, 0, 1.0), (0, 1, 2.0)]).unwrap();
        let col = SparseMatrix::from_triplets(2, 1, &[(0, 0, 3.0), (1, 0, 4.0)]).unwrap();
        let k = kron(&row, &col).unwrap().to_dense();
        assert_eq!(k.as_slice(), &[3.0, 6.0, 4.0, 8.0]);

        assert!(kron(&SparseMatrix::zeros(0, 2), &col).is_err());
    }

    #[test]
    fn kron_reports_overflow() {
        let huge = SparseMatrix::zeros(1, 1 << 40);
        assert!(matches!(kron(&huge, &huge), Err(Error::Overflow(_))));
    }

    #[test]
    fn triangular_solves_small() {
        let l = SparseMatrix::from_triplets(2, 2, &[(0, 0, 2.0), (1, 0, 1.0), (1, 1, 2.0)]).unwrap();
        assert_eq!(triangular_solve(&l, &[2.0, 3.0], TriangularMode::Lower).unwrap(), vec![1.0, 1.0]);
        // Lᵀ = [[2,1],[0,2]]: Lᵀ (1,1) = (3, 2)
        assert_eq!(triangular_solve(&l, &[3.0, 2.0], TriangularMode::LowerTranspose).unwrap(), vec![1.0, 1.0]);
        let u = l.transpose();
        assert_eq!(triangular_solve(&u, &[3.0, 2.0], TriangularMode::Upper).unwrap(), vec![1.0, 1.0]);
        let b = [0.5, -7.0];
        assert_eq!(triangular_solve(&SparseMatrix::identity(2), &b, TriangularMode::Lower).unwrap(), b.to_vec());
    }

    #[test]
    fn triangular_solve_detects_singular_diagonal() {
        let l = SparseMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (1, 0, 1.0)]).unwrap();
        assert!(matches!(
            triangular_solve(&l, &[1.0, 1.0], TriangularMode::Lower),
            Err(Error::SingularFactor { row: 1 })
        ));
        let tiny = SparseMatrix::from_triplets(1, 1, &[(0, 0, 1e-320)]).unwrap();
        assert!(triangular_solve(&tiny, &[1.0], TriangularMode::Lower).is_err());
    }

    #[test]
    fn block_assembly_checks_shapes() {
        let i2 = SparseMatrix::identity(2);
        let m = SparseMatrix::block(&[2, 2], &[2, 2], &[(0, 0, &i2), (1, 1, &i2)]).unwrap();
        assert_eq!(m, SparseMatrix::identity(4));
        assert!(SparseMatrix::block(&[2, 3], &[2], &[(1, 0, &i2)]).is_err());
    }

    #[test]
    fn band_extracts_tridiagonal() {
        let d = DenseMatrix::from_fn(4, 4, |i, j| (1 + i * 4 + j) as f64);
        let t = SparseMatrix::from_dense(&d).band(1, 1);
        assert_eq!(t.nnz(), 10);
        assert_eq!(t.get(0, 2), 0.0);
        assert_eq!(t.get(2, 1), d[(2, 1)]);
    }

    #[test]
    fn matmul_matches_dense() {
        let a = SparseMatrix::from_dense(&DenseMatrix::from_fn(3, 4, |i, j| ((i + 2 * j) % 3) as f64 - 1.0));
        let b = SparseMatrix::from_dense(&DenseMatrix::from_fn(4, 2, |i, j| (i as f64) - (j as f64) * 0.5));
        let c = a.matmul(&b).unwrap().to_dense();
        let expected = a.to_dense().matmul(&b.to_dense()).unwrap();
        assert_eq!(c.as_slice(), expected.as_slice());
    }
}
