use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::quadrature::Integration;
use crate::mesh::Point;

/// Regularity class of a target, which selects the load quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Smoothness {
    SmoothH2,
    Discontinuous,
    SmoothNonzeroBc,
}

/// Subdivision depth used for discontinuous integrands.
pub const SUBDIVISION_DEPTH: u32 = 3;

/// The desired state `target(x)` on the unit cube.
#[derive(Clone)]
pub struct TargetField {
    name: String,
    eval: Arc<dyn Fn(&Point) -> f64 + Send + Sync>,
    smoothness: Smoothness,
    quadrature_order_hint: usize,
}

impl TargetField {
    pub fn new(
        name: impl Into<String>,
        smoothness: Smoothness,
        eval: impl Fn(&Point) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            eval: Arc::new(eval),
            smoothness,
            quadrature_order_hint: 4,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn smoothness(&self) -> Smoothness {
        self.smoothness
    }

    pub fn quadrature_order_hint(&self) -> usize {
        self.quadrature_order_hint
    }

    #[inline]
    pub fn eval(&self, x: &Point) -> f64 {
        (self.eval)(x)
    }

    /// Element integration suited to this target.
    pub fn integration(&self) -> Integration<'_> {
        match self.smoothness {
            Smoothness::Discontinuous => Integration::Subdivided {
                depth: SUBDIVISION_DEPTH,
                detector: &*self.eval,
            },
            _ => Integration::Keast,
        }
    }
}

impl fmt::Debug for TargetField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TargetField")
            .field("name", &self.name)
            .field("smoothness", &self.smoothness)
            .finish()
    }
}
