//! Symmetric factorizations: bidiagonal Cholesky of tridiagonal matrices and
//! threshold incomplete Cholesky (exact Cholesky when the threshold is zero).

use crate::error::{Error, Result};
use crate::sparse::{triangular_solve_in_place, SparseMatrix, TriangularMode};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FactorKind {
    ExactCholesky,
    BidiagonalCholesky,
    IncompleteCholesky { tau: f64 },
}

/// Lower triangular `L` with `L Lᵀ` approximating (or equal to) the factored matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct LowerFactor {
    pub l: SparseMatrix,
    pub kind: FactorKind,
    /// Relative diagonal shift `α` that was needed to avoid breakdown, if any.
    pub shift: Option<f64>,
}

impl LowerFactor {
    pub fn dim(&self) -> usize {
        self.l.nrows()
    }

    /// `(L Lᵀ)⁻¹ b`.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        if b.len() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "factor of order {} applied to vector of length {}",
                self.dim(),
                b.len()
            )));
        }
        let mut x = b.to_vec();
        self.solve_in_place(&mut x)?;
        Ok(x)
    }

    pub fn solve_in_place(&self, x: &mut [f64]) -> Result<()> {
        triangular_solve_in_place(&self.l, x, TriangularMode::Lower)?;
        triangular_solve_in_place(&self.l, x, TriangularMode::LowerTranspose)
    }

    /// `L Lᵀ` as a sparse matrix.
    pub fn product(&self) -> SparseMatrix {
        self.l.matmul(&self.l.transpose()).expect("square factor")
    }
}

/// Cholesky factor of a symmetric positive definite tridiagonal matrix.
pub fn chol_tridiag(t: &SparseMatrix) -> Result<LowerFactor> {
    let n = t.nrows();
    if t.ncols() != n {
        return Err(Error::DimensionMismatch("tridiagonal factor of a non-square matrix".into()));
    }
    if t.triplets().any(|(i, j, _)| i.abs_diff(j) > 1) {
        return Err(Error::InvalidArgument("matrix is not tridiagonal".into()));
    }
    let mut triplets = Vec::with_capacity(2 * n);
    let mut prev_off = 0.0;
    for i in 0..n {
        let d = t.get(i, i) - prev_off * prev_off;
        if !(d > 0.0) || !d.is_finite() {
            return Err(Error::NotPositiveDefinite { index: i, pivot: d });
        }
        let lii = d.sqrt();
        triplets.push((i, i, lii));
        if i + 1 < n {
            let sub = t.get(i + 1, i);
            if sub != t.get(i, i + 1) {
                return Err(Error::InvalidArgument(format!("matrix is not symmetric at ({}, {i})", i + 1)));
            }
            prev_off = sub / lii;
            triplets.push((i + 1, i, prev_off));
        }
    }
    Ok(LowerFactor {
        l: SparseMatrix::from_triplets(n, n, &triplets)?,
        kind: FactorKind::BidiagonalCholesky,
        shift: None,
    })
}

/// What an incomplete-Cholesky drop threshold is measured against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DropRule {
    /// Drop `|L(i,j)| < τ ‖M(:,j)‖₂`.
    #[default]
    Relative,
    /// Drop `|L(i,j)| < τ`.
    Absolute,
}

impl std::str::FromStr for DropRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "relative" => Ok(Self::Relative),
            "absolute" => Ok(Self::Absolute),
            _ => Err(Error::InvalidArgument(format!("unknown drop rule {s:?}"))),
        }
    }
}

/// Left-looking threshold incomplete Cholesky. With `tau = 0` nothing is dropped
/// and the result is the exact sparse Cholesky factor.
///
/// The matrix is read from its lower triangle. The diagonal is never dropped;
/// a non-positive pivot is reported as [`Error::Breakdown`].
pub fn ichol_threshold(m: &SparseMatrix, tau: f64, rule: DropRule) -> Result<LowerFactor> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(Error::DimensionMismatch("Cholesky of a non-square matrix".into()));
    }
    if !(tau >= 0.0) || !tau.is_finite() {
        return Err(Error::InvalidArgument(format!("drop tolerance must be finite and >= 0, got {tau}")));
    }
    // Columns of the lower triangle of M are the rows of its upper triangle.
    let mt = m.transpose();
    let col_norms = m.column_norms();

    let mut col_rows: Vec<Vec<usize>> = Vec::with_capacity(n);
    let mut col_vals: Vec<Vec<f64>> = Vec::with_capacity(n);
    // next[k]: position in column k of the first entry not yet consumed
    let mut next = vec![0usize; n];
    // row_cols[i]: columns k < i with a stored L(i, k)
    let mut row_cols: Vec<Vec<usize>> = vec![Vec::new(); n];

    let mut work = vec![0.0; n];
    let mut marked = vec![false; n];
    let mut pattern: Vec<usize> = Vec::new();

    for j in 0..n {
        pattern.clear();
        let (cols, vals) = mt.row(j);
        for (&i, &v) in cols.iter().zip(vals) {
            if i >= j {
                work[i] = v;
                marked[i] = true;
                pattern.push(i);
            }
        }
        if !marked[j] {
            marked[j] = true;
            work[j] = 0.0;
            pattern.push(j);
        }
        for &k in &row_cols[j] {
            let pos = next[k];
            debug_assert_eq!(col_rows[k][pos], j);
            let ljk = col_vals[k][pos];
            for q in pos..col_rows[k].len() {
                let i = col_rows[k][q];
                if !marked[i] {
                    marked[i] = true;
                    work[i] = 0.0;
                    pattern.push(i);
                }
                work[i] -= col_vals[k][q] * ljk;
            }
            next[k] = pos + 1;
        }

        let pivot = work[j];
        if !(pivot > 0.0) || !pivot.is_finite() {
            return Err(Error::Breakdown { column: j, pivot });
        }
        let ljj = pivot.sqrt();
        let threshold = match rule {
            DropRule::Relative => tau * col_norms[j],
            DropRule::Absolute => tau,
        };
        pattern.sort_unstable();
        let mut rows = Vec::with_capacity(pattern.len());
        let mut values = Vec::with_capacity(pattern.len());
        for &i in &pattern {
            let v = if i == j { ljj } else { work[i] / ljj };
            marked[i] = false;
            work[i] = 0.0;
            if i != j && (v == 0.0 || v.abs() < threshold) {
                continue;
            }
            if i != j {
                row_cols[i].push(j);
            }
            rows.push(i);
            values.push(v);
        }
        next[j] = 1;
        col_rows.push(rows);
        col_vals.push(values);
    }

    let mut triplets = Vec::with_capacity(col_rows.iter().map(Vec::len).sum());
    for (j, (rows, vals)) in col_rows.iter().zip(&col_vals).enumerate() {
        triplets.extend(rows.iter().zip(vals).map(|(&i, &v)| (i, j, v)));
    }
    let kind = if tau == 0.0 { FactorKind::ExactCholesky } else { FactorKind::IncompleteCholesky { tau } };
    Ok(LowerFactor { l: SparseMatrix::from_triplets(n, n, &triplets)?, kind, shift: None })
}

/// Breakdown recovery for [`ichol_threshold`]: on failure, factor `M + α diag(M)`
/// with `α` starting at `initial_alpha` and doubling, at most `max_retries` times.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShiftPolicy {
    pub initial_alpha: f64,
    pub max_retries: usize,
}

impl Default for ShiftPolicy {
    fn default() -> Self {
        Self { initial_alpha: 1e-3, max_retries: 10 }
    }
}

pub fn ichol_with_shift(m: &SparseMatrix, tau: f64, rule: DropRule, policy: ShiftPolicy) -> Result<LowerFactor> {
    let first = match ichol_threshold(m, tau, rule) {
        Ok(f) => return Ok(f),
        Err(e @ Error::Breakdown { .. }) => e,
        Err(e) => return Err(e),
    };
    let diag = SparseMatrix::from_diagonal(&m.diagonal());
    let mut alpha = policy.initial_alpha;
    let mut last = first;
    for _ in 0..policy.max_retries {
        let shifted = m.add(1.0, &diag, alpha)?;
        match ichol_threshold(&shifted, tau, rule) {
            Ok(mut f) => {
                f.shift = Some(alpha);
                return Ok(f);
            }
            Err(e @ Error::Breakdown { .. }) => last = e,
            Err(e) => return Err(e),
        }
        alpha *= 2.0;
    }
    Err(last)
}

/// Exact sparse Cholesky factor.
pub fn chol_sparse(m: &SparseMatrix) -> Result<LowerFactor> {
    ichol_threshold(m, 0.0, DropRule::Relative).map_err(|e| match e {
        Error::Breakdown { column, pivot } => Error::NotPositiveDefinite { index: column, pivot },
        other => other,
    })
}
