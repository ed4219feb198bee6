//! A posteriori error estimation and the solve-estimate-mark-refine loop.

mod estimate;

use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use estimate::{estimate, estimate_nodal, mark_dorfler, Estimate};

use crate::assembly::{target_hminus1_error_squared, target_l2_error_squared, FemSystem, Solution, TargetField};
use crate::mesh::TetMesh;
use crate::solver::{SolverOptions, SolverRegistry};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdaptiveOptions {
    pub theta: f64,
    /// Stop once the interior dof count reaches this.
    pub dof_budget: usize,
    pub max_levels: usize,
    pub strategy: String,
    pub solver: SolverOptions,
    /// Compute the L2 and H^-1 distances to the target on every level.
    pub track_errors: bool,
}

impl Default for AdaptiveOptions {
    fn default() -> Self {
        Self {
            theta: 0.5,
            dof_budget: 10_000,
            max_levels: 200,
            strategy: "amg".into(),
            solver: SolverOptions::default(),
            track_errors: true,
        }
    }
}

/// One row of the adaptive history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelRecord {
    pub level: usize,
    pub dofs: usize,
    pub tets: usize,
    pub eta: f64,
    /// `||target - u_h||_{L2}^2`, NaN when not tracked.
    pub l2_error_sq: f64,
    /// `||target - u_h||_{H^-1}^2`, NaN when not tracked.
    pub hminus1_error_sq: f64,
    pub iterations: usize,
    pub converged: bool,
    pub marked: usize,
    pub setup_seconds: f64,
    pub solve_seconds: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone)]
pub struct AdaptiveResult {
    pub mesh: TetMesh,
    pub system: FemSystem,
    pub coefficients: Vec<f64>,
    pub estimate: Estimate,
    pub history: Vec<LevelRecord>,
    /// Tets marked on each level that was refined, indexed by level.
    pub marked: Vec<Vec<usize>>,
}

impl AdaptiveResult {
    pub fn solution(&self) -> Solution<'_> {
        Solution::new(self.coefficients.clone(), &self.system, &self.mesh).expect("consistent result")
    }
}

/// Adaptive loop starting from `initial` until the dof budget is reached.
pub fn adaptive_solve(
    initial: TetMesh,
    target: &TargetField,
    rho: f64,
    opts: &AdaptiveOptions,
    registry: &SolverRegistry,
) -> Result<AdaptiveResult> {
    if !(opts.theta > 0.0 && opts.theta <= 1.0) {
        return Err(Error::InvalidArgument(format!("theta must lie in (0, 1], got {}", opts.theta)));
    }
    let strategy = registry.get(&opts.strategy)?;
    let mut mesh = initial;
    let mut history = Vec::new();
    let mut marked_per_level = Vec::new();
    loop {
        let started = Instant::now();
        let level = history.len();
        let system = FemSystem::build(&mesh, rho, target)?;
        let out = strategy.solve(&mesh, &system, &opts.solver)?;
        let sol = Solution::new(out.coefficients, &system, &mesh)?;
        let (l2, hm1) = if opts.track_errors {
            (target_l2_error_squared(&sol, target), target_hminus1_error_squared(&sol, target)?)
        } else {
            (f64::NAN, f64::NAN)
        };
        let est = estimate(&sol, target)?;
        let dofs = system.n_dofs();
        let done = dofs >= opts.dof_budget || level + 1 >= opts.max_levels;
        let marked = if done { Vec::new() } else { mark_dorfler(&est, opts.theta)? };
        history.push(LevelRecord {
            level,
            dofs,
            tets: mesh.n_tets(),
            eta: est.global,
            l2_error_sq: l2,
            hminus1_error_sq: hm1,
            iterations: out.report.iterations,
            converged: out.report.converged,
            marked: marked.len(),
            setup_seconds: out.setup_seconds,
            solve_seconds: out.solve_seconds,
            seconds: started.elapsed().as_secs_f64(),
        });
        if done {
            let coefficients = sol.coefficients;
            return Ok(AdaptiveResult {
                mesh,
                system,
                coefficients,
                estimate: est,
                history,
                marked: marked_per_level,
            });
        }
        let refined = mesh.bisect_marked(&marked)?;
        // a round may only add boundary vertices, so count all vertices
        if refined.n_vertices() <= mesh.n_vertices() {
            return Err(Error::Stagnation { dofs });
        }
        marked_per_level.push(marked);
        drop(sol);
        drop(system);
        mesh = refined;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::Smoothness;

    fn sin3() -> TargetField {
        TargetField::new("smooth", Smoothness::SmoothH2, |x| {
            use std::f64::consts::PI;
            (PI * x[0]).sin() * (PI * x[1]).sin() * (PI * x[2]).sin()
        })
    }

    #[test]
    fn budget_below_initial_returns_one_row() {
        let m = TetMesh::build_structured_cube(4).unwrap();
        let opts = AdaptiveOptions { dof_budget: 1, ..Default::default() };
        let r = adaptive_solve(m, &sin3(), 1.0, &opts, &SolverRegistry::default()).unwrap();
        assert_eq!(r.history.len(), 1);
        assert_eq!(r.history[0].dofs, 27);
        assert!(r.marked.is_empty());
    }

    #[test]
    fn dofs_grow_monotonically() {
        let m = TetMesh::build_structured_cube(2).unwrap();
        let opts = AdaptiveOptions { dof_budget: 300, ..Default::default() };
        let r = adaptive_solve(m, &sin3(), 1e-2, &opts, &SolverRegistry::default()).unwrap();
        assert!(r.history.windows(2).all(|w| w[1].dofs >= w[0].dofs && w[1].tets > w[0].tets));
        assert!(r.history.last().unwrap().dofs >= 300);
        assert_eq!(r.marked.len(), r.history.len() - 1);
        r.mesh.check_conformity().unwrap();
    }
}
