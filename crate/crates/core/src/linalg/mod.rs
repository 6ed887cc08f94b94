//! Sparse and dense matrix primitives and the truncated symmetric eigensolver.

mod basis;
mod dense;
mod lanczos;
mod operator;
mod sparse;
mod tridiag;

pub use basis::SpectralBasis;
pub use dense::{dense_symmetric_eig, DENSE_EIG_LIMIT};
pub(crate) use dense::check_symmetric;
pub use lanczos::{default_max_restarts, lanczos_smallest, DEFAULT_TOL};
pub use operator::{SparseSymmetricOperator, DENSE_LIMIT};
pub use sparse::SparseBinaryMatrix;

/// `op · x`, validated against the operator dimension.
pub fn apply_operator(op: &SparseSymmetricOperator, x: &[f64]) -> crate::Result<Vec<f64>> {
    op.apply(x)
}
