use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::assembly::{Smoothness, TargetField};
use crate::mesh::Point;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Example {
    Smooth,
    Box,
    NonzeroBc,
}

impl Example {
    pub fn target(self) -> TargetField {
        match self {
            Example::Smooth => target_smooth(),
            Example::Box => target_box(),
            Example::NonzeroBc => target_nonzero_bc(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Example::Smooth => "smooth",
            Example::Box => "box",
            Example::NonzeroBc => "nonzero_bc",
        }
    }
}

impl fmt::Display for Example {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Example {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "smooth" => Ok(Example::Smooth),
            "box" => Ok(Example::Box),
            "nonzero_bc" | "nonzero-bc" => Ok(Example::NonzeroBc),
            _ => Err(Error::Parse(format!("unknown example `{s}`"))),
        }
    }
}

#[inline]
fn sin3(x: &Point) -> f64 {
    (PI * x[0]).sin() * (PI * x[1]).sin() * (PI * x[2]).sin()
}

/// `sin(pi x) sin(pi y) sin(pi z)`.
pub fn target_smooth() -> TargetField {
    TargetField::new("smooth", Smoothness::SmoothH2, sin3)
}

/// Indicator of the open box `(1/4, 3/4)^3`.
pub fn target_box() -> TargetField {
    TargetField::new("box", Smoothness::Discontinuous, |x| {
        if x.iter().all(|&c| c > 0.25 && c < 0.75) {
            1.0
        } else {
            0.0
        }
    })
}

/// `1 + sin(pi x) sin(pi y) sin(pi z)`, which does not vanish on the boundary.
pub fn target_nonzero_bc() -> TargetField {
    TargetField::new("nonzero_bc", Smoothness::SmoothNonzeroBc, |x| 1.0 + sin3(x))
}

/// Exact state for the smooth target: `u = sin3 / (3 rho pi^2 + 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ManufacturedExact {
    rho: f64,
    factor: f64,
}

pub fn manufactured_exact(rho: f64) -> Result<ManufacturedExact> {
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(Error::InvalidArgument(format!("rho must be positive, got {rho}")));
    }
    Ok(ManufacturedExact::with_rho(rho))
}

impl ManufacturedExact {
    fn with_rho(rho: f64) -> Self {
        Self {
            rho,
            factor: 1.0 / (3.0 * rho * PI * PI + 1.0),
        }
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn value(&self, x: &Point) -> f64 {
        self.factor * sin3(x)
    }

    pub fn gradient(&self, x: &Point) -> [f64; 3] {
        let (s, c): (Vec<f64>, Vec<f64>) = x.iter().map(|&t| ((PI * t).sin(), (PI * t).cos())).unzip();
        let k = self.factor * PI;
        [k * c[0] * s[1] * s[2], k * s[0] * c[1] * s[2], k * s[0] * s[1] * c[2]]
    }

    pub fn laplacian(&self, x: &Point) -> f64 {
        -3.0 * PI * PI * self.value(x)
    }
}
