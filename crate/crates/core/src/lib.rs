//! Finite-element solver and benchmark harness for the singularly perturbed
//! reaction-diffusion problem `-rho * Lap(u) + u = target` on the unit cube,
//! with homogeneous Dirichlet boundary conditions.
//!
//! The crate is organised bottom-up:
//!
//! - [`mesh`]: Kuhn tetrahedralisations of the cube, newest-vertex bisection,
//!   VTK export.
//! - [`linalg`]: CSR matrices, dense Cholesky, preconditioned CG, MatrixMarket.
//! - [`assembly`]: P1 stiffness/mass/load assembly, error norms, targets.
//! - [`amg`]: red-black algebraic multigrid V-cycle.
//! - [`bddc`]: two-level BDDC for the interface Schur complement.
//! - [`adapt`]: residual estimator, Dörfler marking, adaptive loop.
//! - [`solver`]: interchangeable solver strategies selected by name.
//! - [`experiments`]: convergence/robustness tables and CSV output.

pub mod adapt;
pub mod amg;
pub mod assembly;
pub mod bddc;
pub mod experiments;
pub mod linalg;
pub mod mesh;
pub mod solver;

mod error;

pub use error::{Error, Result};
