//! Solver strategies for the assembled system, looked up by name.
//!
//! Every strategy takes the mesh and the assembled [`FemSystem`] and returns
//! the coefficient vector together with the PCG record. Iterative strategies
//! probe their preconditioner for symmetry and positivity before use.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::amg::{AmgHierarchy, AmgOptions, SgsPreconditioner};
use crate::assembly::FemSystem;
use crate::bddc::{partition_geometric, BddcOperator, BddcOptions};
use crate::linalg::{
    check_preconditioner, pcg, Cholesky, IdentityPreconditioner, JacobiPreconditioner, LinearOperator,
    PcgOptions, PcgReport, Preconditioner,
};
use crate::mesh::TetMesh;
use crate::{Error, Result};

/// Largest system the dense direct strategy accepts.
pub const DENSE_DIRECT_LIMIT: usize = 4000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Number of subdomains for domain decomposition.
    pub subdomains: usize,
    pub amg: AmgOptions,
    pub bddc: BddcOptions,
    /// Seed for the preconditioner probes.
    pub seed: u64,
    pub probe: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 500,
            subdomains: 4,
            amg: AmgOptions::default(),
            bddc: BddcOptions::default(),
            seed: 0,
            probe: true,
        }
    }
}

impl SolverOptions {
    pub fn pcg(&self) -> PcgOptions {
        PcgOptions {
            tol: self.tol,
            max_iter: self.max_iter,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub strategy: &'static str,
    pub coefficients: Vec<f64>,
    pub report: PcgReport,
    pub setup_seconds: f64,
    pub solve_seconds: f64,
}

pub trait SolverStrategy: Send + Sync {
    fn name(&self) -> &'static str;
    fn description(&self) -> &'static str;
    fn solve(&self, mesh: &TetMesh, system: &FemSystem, opts: &SolverOptions) -> Result<SolveOutcome>;
}

fn run_pcg(
    name: &'static str,
    op: &dyn LinearOperator,
    f: &[f64],
    precond: &dyn Preconditioner,
    opts: &SolverOptions,
    started: Instant,
) -> Result<SolveOutcome> {
    if opts.probe {
        check_preconditioner(precond, opts.seed)?;
    }
    let setup_seconds = started.elapsed().as_secs_f64();
    let t = Instant::now();
    let (coefficients, report) = pcg(op, f, precond, &opts.pcg())?;
    Ok(SolveOutcome {
        strategy: name,
        coefficients,
        report,
        setup_seconds,
        solve_seconds: t.elapsed().as_secs_f64(),
    })
}

/// Dense Cholesky factorisation of the full matrix.
pub struct DenseDirect;

impl SolverStrategy for DenseDirect {
    fn name(&self) -> &'static str {
        "none"
    }

    fn description(&self) -> &'static str {
        "dense Cholesky, no iteration"
    }

    fn solve(&self, _mesh: &TetMesh, system: &FemSystem, _opts: &SolverOptions) -> Result<SolveOutcome> {
        let n = system.n_dofs();
        if n > DENSE_DIRECT_LIMIT {
            return Err(Error::InvalidArgument(format!(
                "dense direct solve limited to {DENSE_DIRECT_LIMIT} dofs, system has {n}"
            )));
        }
        let t = Instant::now();
        let chol = Cholesky::factor(&system.matrix().to_dense())?;
        let setup_seconds = t.elapsed().as_secs_f64();
        let t = Instant::now();
        let coefficients = chol.solve(system.load());
        Ok(SolveOutcome {
            strategy: self.name(),
            coefficients,
            report: PcgReport {
                iterations: 0,
                history: Vec::new(),
                converged: true,
            },
            setup_seconds,
            solve_seconds: t.elapsed().as_secs_f64(),
        })
    }
}

/// Unpreconditioned CG.
pub struct PlainCg;

impl SolverStrategy for PlainCg {
    fn name(&self) -> &'static str {
        "identity"
    }

    fn description(&self) -> &'static str {
        "CG without preconditioning"
    }

    fn solve(&self, _mesh: &TetMesh, system: &FemSystem, opts: &SolverOptions) -> Result<SolveOutcome> {
        let t = Instant::now();
        let p = IdentityPreconditioner(system.n_dofs());
        run_pcg(self.name(), system.matrix(), system.load(), &p, opts, t)
    }
}

pub struct Jacobi;

impl SolverStrategy for Jacobi {
    fn name(&self) -> &'static str {
        "jacobi"
    }

    fn description(&self) -> &'static str {
        "PCG with diagonal scaling"
    }

    fn solve(&self, _mesh: &TetMesh, system: &FemSystem, opts: &SolverOptions) -> Result<SolveOutcome> {
        let t = Instant::now();
        let p = JacobiPreconditioner::new(system.matrix())?;
        run_pcg(self.name(), system.matrix(), system.load(), &p, opts, t)
    }
}

pub struct SymmetricGaussSeidel;

impl SolverStrategy for SymmetricGaussSeidel {
    fn name(&self) -> &'static str {
        "sgs"
    }

    fn description(&self) -> &'static str {
        "PCG with one symmetric Gauss-Seidel sweep"
    }

    fn solve(&self, _mesh: &TetMesh, system: &FemSystem, opts: &SolverOptions) -> Result<SolveOutcome> {
        let t = Instant::now();
        let p = SgsPreconditioner::new(system.matrix())?;
        run_pcg(self.name(), system.matrix(), system.load(), &p, opts, t)
    }
}

pub struct Amg;

impl SolverStrategy for Amg {
    fn name(&self) -> &'static str {
        "amg"
    }

    fn description(&self) -> &'static str {
        "PCG with one algebraic multigrid V-cycle"
    }

    fn solve(&self, _mesh: &TetMesh, system: &FemSystem, opts: &SolverOptions) -> Result<SolveOutcome> {
        let t = Instant::now();
        let p = AmgHierarchy::build(system.matrix(), &opts.amg)?;
        run_pcg(self.name(), system.matrix(), system.load(), &p, opts, t)
    }
}

pub struct Bddc;

impl SolverStrategy for Bddc {
    fn name(&self) -> &'static str {
        "bddc"
    }

    fn description(&self) -> &'static str {
        "PCG on the interface Schur complement with a BDDC preconditioner"
    }

    fn solve(&self, mesh: &TetMesh, system: &FemSystem, opts: &SolverOptions) -> Result<SolveOutcome> {
        let t = Instant::now();
        let partition = partition_geometric(mesh, opts.subdomains)?;
        let op = BddcOperator::build_with(mesh, system, partition, &opts.bddc)?;
        let g = op.reduce_rhs(system.load())?;
        let mut out = run_pcg(self.name(), &op.schur(), &g, &op, opts, t)?;
        let t = Instant::now();
        out.coefficients = op.expand_solution(&out.coefficients, system.load())?;
        out.solve_seconds += t.elapsed().as_secs_f64();
        Ok(out)
    }
}

/// Named solver strategies.
pub struct SolverRegistry {
    strategies: Vec<Box<dyn SolverStrategy>>,
}

impl Default for SolverRegistry {
    fn default() -> Self {
        let mut r = Self::empty();
        r.register(Box::new(DenseDirect));
        r.register(Box::new(PlainCg));
        r.register(Box::new(Jacobi));
        r.register(Box::new(SymmetricGaussSeidel));
        r.register(Box::new(Amg));
        r.register(Box::new(Bddc));
        r
    }
}

impl SolverRegistry {
    pub fn empty() -> Self {
        Self { strategies: Vec::new() }
    }

    /// Adds a strategy, replacing any previous one with the same name.
    pub fn register(&mut self, s: Box<dyn SolverStrategy>) {
        self.strategies.retain(|e| e.name() != s.name());
        self.strategies.push(s);
    }

    pub fn get(&self, name: &str) -> Result<&dyn SolverStrategy> {
        self.strategies
            .iter()
            .find(|s| s.name() == name)
            .map(|s| s.as_ref())
            .ok_or_else(|| Error::UnknownStrategy(name.to_string()))
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.strategies.iter().map(|s| s.name()).collect()
    }

    pub fn solve(&self, name: &str, mesh: &TetMesh, system: &FemSystem, opts: &SolverOptions) -> Result<SolveOutcome> {
        self.get(name)?.solve(mesh, system, opts)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::{Smoothness, TargetField};
    use crate::linalg::vector::max_abs_diff;

    #[test]
    fn all_strategies_agree_with_dense() {
        let m = TetMesh::build_structured_cube(5).unwrap();
        let t = TargetField::new("box", Smoothness::Discontinuous, |x| {
            if x.iter().all(|&c| c > 0.25 && c < 0.75) { 1.0 } else { 0.0 }
        });
        let s = FemSystem::build(&m, 1e-2, &t).unwrap();
        let reg = SolverRegistry::default();
        let opts = SolverOptions { tol: 1e-12, subdomains: 2, ..Default::default() };
        let dense = reg.solve("none", &m, &s, &opts).unwrap().coefficients;
        for name in ["identity", "jacobi", "sgs", "amg", "bddc"] {
            let out = reg.solve(name, &m, &s, &opts).unwrap();
            assert_eq!(out.strategy, name);
            assert!(out.report.converged, "{name}");
            assert!(max_abs_diff(&out.coefficients, &dense) < 1e-9, "{name}");
        }
    }

    #[test]
    fn unknown_name_is_reported() {
        let reg = SolverRegistry::default();
        assert!(matches!(reg.get("multigrid"), Err(Error::UnknownStrategy(n)) if n == "multigrid"));
        assert_eq!(reg.names(), vec!["none", "identity", "jacobi", "sgs", "amg", "bddc"]);
    }

    struct Fake;
    impl SolverStrategy for Fake {
        fn name(&self) -> &'static str {
            "amg"
        }
        fn description(&self) -> &'static str {
            "replacement"
        }
        fn solve(&self, _: &TetMesh, _: &FemSystem, _: &SolverOptions) -> Result<SolveOutcome> {
            Err(Error::InvalidArgument("fake".into()))
        }
    }

    #[test]
    fn registering_replaces_by_name() {
        let mut reg = SolverRegistry::default();
        reg.register(Box::new(Fake));
        assert_eq!(reg.get("amg").unwrap().description(), "replacement");
        assert_eq!(reg.names().len(), 6);
    }

    #[test]
    fn dense_limit_enforced() {
        let m = TetMesh::build_structured_cube(17).unwrap();
        let t = TargetField::new("zero", Smoothness::SmoothH2, |_| 0.0);
        let s = FemSystem::build(&m, 1.0, &t).unwrap();
        assert!(DenseDirect.solve(&m, &s, &SolverOptions::default()).is_err());
    }
}
