use thiserror::Error;

/// Errors reported by the kernels, factorizations and solvers in this crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("index overflow: {0}")]
    Overflow(String),

    #[error("invalid sparse structure: {0}")]
    InvalidStructure(String),

    #[error("singular triangular factor: zero or subnormal diagonal at row {row}")]
    SingularFactor { row: usize },

    #[error("matrix is not positive definite: pivot {pivot:e} at index {index}")]
    NotPositiveDefinite { index: usize, pivot: f64 },

    #[error("incomplete Cholesky breakdown at column {column} (pivot {pivot:e})")]
    Breakdown { column: usize, pivot: f64 },

    #[error("operator is not positive definite: p^T A p = {curvature:e} at iteration {iteration}")]
    IndefiniteOperator { iteration: usize, curvature: f64 },

    #[error("eigenvalue iteration did not converge after {0} sweeps")]
    NoConvergence(usize),

    #[error("eigenvalue backward-error check failed: residual {residual:e} exceeds {bound:e}")]
    BackwardError { residual: f64, bound: f64 },

    #[error("rank deficient: {0}")]
    RankDeficient(String),

    #[error("non-finite value produced by {0}")]
    NonFinite(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
