//! Dense and sparse linear-algebra kernels shared by the other modules.

mod eig;
mod sparse;
mod svd;

pub use eig::{dense_eig, EigenDecomposition};
pub use sparse::{sparse_solve, SparseLu, SparseMatrix};
pub use svd::{numerical_rank, truncated_svd, RankRule, TruncatedSvd, DEFAULT_ENERGY, SINGULAR_CUTOFF};
