use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::targets::Example;
use crate::solver::SolverOptions;
use crate::{Error, Result};

/// Rows of the AMG robustness table: `rho = 10^0, 10^-2, ..., 10^-12`.
pub const BENCH_RHO: [f64; 7] = [1.0, 1e-2, 1e-4, 1e-6, 1e-8, 1e-10, 1e-12];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub example: Example,
    pub rho_list: Vec<f64>,
    /// Structured mesh resolutions (cells per axis).
    pub n_list: Vec<usize>,
    pub dof_budget: Option<usize>,
    pub precond: String,
    /// Subdomain counts for domain decomposition.
    pub p: Vec<usize>,
    pub tol: f64,
    pub max_iter: usize,
    /// Worker threads, 0 for the runtime default.
    pub threads: usize,
    pub seed: u64,
    pub theta: f64,
    /// Resolution of the initial mesh of adaptive runs.
    pub initial_n: usize,
    pub output: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            example: Example::Smooth,
            rho_list: vec![1.0],
            n_list: vec![4, 8, 16],
            dof_budget: None,
            precond: "amg".into(),
            p: vec![4],
            tol: 1e-8,
            max_iter: 500,
            threads: 0,
            seed: 0,
            theta: 0.5,
            initial_n: 4,
            output: None,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if !(self.tol > 0.0) || !self.tol.is_finite() {
            return bad(format!("tol must be positive, got {}", self.tol));
        }
        if self.rho_list.is_empty() {
            return bad("rho list is empty".into());
        }
        if let Some(r) = self.rho_list.iter().find(|r| !(**r > 0.0) || !r.is_finite()) {
            return bad(format!("rho must be positive, got {r}"));
        }
        if self.n_list.contains(&0) {
            return bad("mesh resolution must be at least 1".into());
        }
        if self.precond == "bddc" {
            if self.p.is_empty() {
                return bad("no subdomain count given".into());
            }
            if let Some(p) = self.p.iter().find(|&&p| p < 2) {
                return bad(format!("bddc needs at least 2 subdomains, got {p}"));
            }
        }
        if !(self.theta > 0.0 && self.theta <= 1.0) {
            return bad(format!("theta must lie in (0, 1], got {}", self.theta));
        }
        if self.max_iter == 0 {
            return bad("max_iter must be positive".into());
        }
        Ok(())
    }

    pub fn solver_options(&self, subdomains: usize) -> SolverOptions {
        SolverOptions {
            tol: self.tol,
            max_iter: self.max_iter,
            subdomains,
            seed: self.seed,
            ..SolverOptions::default()
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn from_toml(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Parse(e.to_string()))
    }
}
