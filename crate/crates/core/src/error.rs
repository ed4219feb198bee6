use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is not positive definite (pivot {pivot:e} at row {row})")]
    NotPositiveDefinite { row: usize, pivot: f64 },

    #[error("degenerate tetrahedron {tet} (volume {volume:e})")]
    DegenerateElement { tet: usize, volume: f64 },

    #[error("indefinite operator detected in CG at iteration {iteration} (p'Ap = {curvature:e})")]
    Indefinite { iteration: usize, curvature: f64 },

    #[error("zero diagonal entry at row {0}")]
    ZeroDiagonal(usize),

    #[error("rank-deficient primal constraints on subdomain {subdomain}")]
    RankDeficientConstraints { subdomain: usize },

    #[error("refinement closure did not terminate after {0} rounds")]
    ClosureDiverged(usize),

    #[error("adaptive refinement stagnated at {dofs} dofs")]
    Stagnation { dofs: usize },

    #[error("unknown solver strategy `{0}`")]
    UnknownStrategy(String),

    #[error("preconditioner failed the {probe} probe (relative defect {defect:e})")]
    ProbeFailed { probe: &'static str, defect: f64 },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
