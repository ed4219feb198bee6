//! Sparse and dense linear algebra used throughout the crate.

mod dense;
pub mod mmio;
mod pcg;
mod sparse;
pub mod vector;

pub use dense::{cholesky_solve, Cholesky, DenseMatrix};
pub use pcg::{
    check_preconditioner, pcg, pcg_with_monitor, positivity_probe, symmetry_defect,
    IdentityPreconditioner, JacobiPreconditioner, LinearOperator, PcgOptions, PcgReport,
    Preconditioner,
};
pub use sparse::CsrMatrix;
