//! Block preconditioners for double saddle-point systems
//!
//! ```text
//! [ A  Bᵀ 0  ] [x]   [f]
//! [ B  0  Cᵀ ] [y] = [g]
//! [ 0  C  0  ] [z]   [h]
//! ```
//!
//! together with the sparse kernels, factorizations, Krylov solvers and dense
//! eigenvalue tools needed to build, apply and analyse them.

pub mod dense;
pub mod error;
pub mod factor;
pub mod krylov;
pub mod mm;
pub mod precond;
pub mod problem;
pub mod sparse;
pub mod spectral;

pub use dense::DenseMatrix;
pub use error::{Error, Result};
pub use problem::BlockSaddleSystem;
pub use sparse::SparseMatrix;
