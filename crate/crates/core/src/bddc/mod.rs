//! Balancing domain decomposition by constraints.
//!
//! The mesh is split by recursive coordinate bisection; subdomain interiors
//! are eliminated and the interface Schur complement is solved by PCG with a
//! two-level BDDC preconditioner. Primal constraints are point values at
//! subdomain corners and one average per subdomain face; interface dofs are
//! weighted by inverse multiplicity.

mod operator;
mod partition;

pub use operator::{BddcOperator, BddcOptions, CoarseOperator, PrimalKind, SchurComplement};
pub use partition::{partition_geometric, DofClass, Partition};
