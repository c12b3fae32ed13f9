//! Sparse and small dense linear algebra kernels.

mod csr;
mod dense;

pub use csr::{solve_shifted, topological_order, Csr};
pub use dense::{max_symmetric_eigenvalue, orthonormalize, spectral_norm, ColumnBasis, HessenbergTransfer};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("singular system: {0}")]
    Singular(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}
