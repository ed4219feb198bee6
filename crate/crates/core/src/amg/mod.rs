//! Algebraic multigrid built from the matrix graph alone.
//!
//! Coarsening is a greedy red-black colouring in ascending dof order: an
//! unmarked dof becomes coarse and its unmarked neighbours become fine. Fine
//! dofs are interpolated by the plain average of their coarse neighbours,
//! coarse operators are Galerkin products, and the V-cycle smooths with one
//! forward Gauss-Seidel sweep on the way down and one backward sweep on the
//! way up, which keeps the cycle symmetric.

mod coarsen;
mod hierarchy;
mod smoother;

pub use coarsen::{coarsen_redblack, galerkin_coarse, DofKind};
pub use hierarchy::{AmgHierarchy, AmgLevel, AmgOptions};
pub use smoother::{gauss_seidel_backward, gauss_seidel_forward, sgs_sweep, SgsPreconditioner};
