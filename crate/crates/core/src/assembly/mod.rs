//! P1 finite-element assembly and error measurement.

mod element;
mod norms;
pub mod quadrature;
mod system;
mod target;

pub use element::ElementGeometry;
pub use norms::{
    dual_load, h1_semi_error, h1_semi_error_nodal, hminus1_error, hminus1_norm, l2_error,
    l2_error_nodal, l2_error_squared_per_element, recover_control, target_hminus1_error_squared,
    target_l2_error_squared,
};
pub use system::{
    assemble_load, assemble_load_on, assemble_mass, assemble_mass_full, assemble_matrix,
    assemble_stiffness, assemble_stiffness_full, DofMap, FemSystem, Solution,
};
pub use target::{Smoothness, TargetField, SUBDIVISION_DEPTH};
