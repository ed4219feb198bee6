use std::time::Instant;

use super::config::ExperimentConfig;
use super::table::{BenchRow, BenchTable, EocParameter, EocRow, EocTable};
use super::targets::{manufactured_exact, Example};
use crate::adapt::{adaptive_solve, AdaptiveOptions, LevelRecord};
use crate::assembly::{
    h1_semi_error, l2_error, target_hminus1_error_squared, target_l2_error_squared, FemSystem, Solution,
};
use crate::mesh::TetMesh;
use crate::solver::{SolveOutcome, SolverRegistry};
use crate::{Error, Result};

/// Default dof budget of adaptive runs when the config leaves it open.
pub const DEFAULT_DOF_BUDGET: usize = 10_000;

fn require_example(cfg: &ExperimentConfig, allowed: &[Example], what: &str) -> Result<()> {
    cfg.validate()?;
    if allowed.contains(&cfg.example) {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "{what} is not defined for the `{}` example",
            cfg.example
        )))
    }
}

fn subdomains(cfg: &ExperimentConfig) -> usize {
    cfg.p.first().copied().unwrap_or(4)
}

/// Mesh resolution matched to `rho`: `n = ceil(rho^{-1/2})`, at least 1.
/// The small slack keeps exact squares such as `1e-4` from rounding up.
pub fn coupled_resolution(rho: f64) -> usize {
    ((1.0 / rho.sqrt() - 1e-9).ceil() as usize).max(1)
}

fn failed_eoc_row(rho: f64, n: usize, dofs: usize, k: usize, err: &Error) -> EocRow {
    EocRow {
        rho,
        h: 1.0 / n as f64,
        n,
        dofs,
        errors: vec![f64::NAN; k],
        eoc: vec![],
        iterations: 0,
        converged: false,
        setup_seconds: 0.0,
        solve_seconds: 0.0,
        failure: Some(err.to_string()),
    }
}

fn outcome_row(rho: f64, n: usize, dofs: usize, errors: Vec<f64>, out: &SolveOutcome) -> EocRow {
    EocRow {
        rho,
        h: 1.0 / n as f64,
        n,
        dofs,
        errors,
        eoc: vec![],
        iterations: out.report.iterations,
        converged: out.report.converged,
        setup_seconds: out.setup_seconds,
        solve_seconds: out.solve_seconds,
        failure: None,
    }
}

/// L2 and H1-seminorm errors against the manufactured solution on
/// structured meshes, for every `rho` and `n` of the config.
pub fn run_convergence_table(cfg: &ExperimentConfig, registry: &SolverRegistry) -> Result<EocTable> {
    require_example(cfg, &[Example::Smooth], "the h-convergence table")?;
    let target = cfg.example.target();
    let opts = cfg.solver_options(subdomains(cfg));
    let meshes = cfg
        .n_list
        .iter()
        .map(|&n| TetMesh::build_structured_cube(n))
        .collect::<Result<Vec<_>>>()?;
    let mut table = EocTable::new(EocParameter::H, &["l2", "h1_semi"]);
    for &rho in &cfg.rho_list {
        let exact = manufactured_exact(rho)?;
        for (mesh, &n) in meshes.iter().zip(&cfg.n_list) {
            let dofs = mesh.n_interior_dofs();
            let row = (|| {
                let system = FemSystem::build(mesh, rho, &target)?;
                let out = registry.solve(&cfg.precond, mesh, &system, &opts)?;
                let sol = Solution::new(out.coefficients.clone(), &system, mesh)?;
                let l2 = l2_error(&sol, &|x| exact.value(x));
                let h1 = h1_semi_error(&sol, &|x| exact.gradient(x))?;
                Ok(outcome_row(rho, n, dofs, vec![l2, h1], &out))
            })()
            .unwrap_or_else(|e: Error| failed_eoc_row(rho, n, dofs, 2, &e));
            table.push(row);
        }
    }
    Ok(table)
}

/// Squared H^-1 and L2 distances between the target and the state with the
/// mesh size coupled to `rho`, with eoc in `rho`.
pub fn run_rho_coupled_table(cfg: &ExperimentConfig, registry: &SolverRegistry) -> Result<EocTable> {
    require_example(cfg, &[Example::Smooth], "the rho-coupled table")?;
    let target = cfg.example.target();
    let opts = cfg.solver_options(subdomains(cfg));
    let mut table = EocTable::new(EocParameter::Rho, &["hminus1_sq", "l2_sq"]);
    for &rho in &cfg.rho_list {
        let n = coupled_resolution(rho);
        let row = (|| {
            let mesh = TetMesh::build_structured_cube(n)?;
            let dofs = mesh.n_interior_dofs();
            let system = FemSystem::build(&mesh, rho, &target)?;
            let out = registry.solve(&cfg.precond, &mesh, &system, &opts)?;
            let sol = Solution::new(out.coefficients.clone(), &system, &mesh)?;
            let hm1 = target_hminus1_error_squared(&sol, &target)?;
            let l2 = target_l2_error_squared(&sol, &target);
            Ok(outcome_row(rho, n, dofs, vec![hm1, l2], &out))
        })()
        .unwrap_or_else(|e: Error| failed_eoc_row(rho, n, 0, 2, &e));
        table.push(row);
    }
    Ok(table)
}

/// Iteration counts and timings over `n x p x rho` (p only for bddc).
/// Cells run one after another so that timings are not disturbed.
pub fn run_precond_bench(cfg: &ExperimentConfig, registry: &SolverRegistry) -> Result<BenchTable> {
    cfg.validate()?;
    registry.get(&cfg.precond)?;
    let target = cfg.example.target();
    let ps: Vec<Option<usize>> = if cfg.precond == "bddc" {
        cfg.p.iter().map(|&p| Some(p)).collect()
    } else {
        vec![None]
    };
    let mut table = BenchTable::default();
    for &n in &cfg.n_list {
        let mesh = TetMesh::build_structured_cube(n)?;
        let dofs = mesh.n_interior_dofs();
        for &p in &ps {
            let opts = cfg.solver_options(p.unwrap_or_else(|| subdomains(cfg)));
            for &rho in &cfg.rho_list {
                let mut row = BenchRow {
                    precond: cfg.precond.clone(),
                    rho,
                    h: 1.0 / n as f64,
                    n,
                    p,
                    dofs,
                    iterations: 0,
                    converged: false,
                    setup_seconds: 0.0,
                    solve_seconds: 0.0,
                    failure: None,
                };
                let started = Instant::now();
                match FemSystem::build(&mesh, rho, &target)
                    .and_then(|s| registry.solve(&cfg.precond, &mesh, &s, &opts))
                {
                    Ok(out) => {
                        row.iterations = out.report.iterations;
                        row.converged = out.report.converged;
                        row.setup_seconds = out.setup_seconds;
                        row.solve_seconds = out.solve_seconds;
                    }
                    Err(e) => {
                        row.failure = Some(e.to_string());
                        row.setup_seconds = started.elapsed().as_secs_f64();
                    }
                }
                table.rows.push(row);
            }
        }
    }
    Ok(table)
}

/// Per-`rho` adaptive histories and the final-level errors as a rho table.
#[derive(Debug, Clone)]
pub struct AdaptiveReport {
    pub runs: Vec<(f64, Vec<LevelRecord>)>,
    pub table: EocTable,
}

impl AdaptiveReport {
    pub fn failed_rows(&self) -> usize {
        let bad_levels: usize = self
            .runs
            .iter()
            .map(|(_, h)| h.iter().filter(|l| !l.converged).count())
            .sum();
        bad_levels + self.table.failed_rows()
    }
}

/// Adaptive runs from a structured mesh of `initial_n` cells per axis.
pub fn run_adaptive_experiment(cfg: &ExperimentConfig, registry: &SolverRegistry) -> Result<AdaptiveReport> {
    require_example(cfg, &[Example::Box, Example::NonzeroBc], "the adaptive experiment")?;
    registry.get(&cfg.precond)?;
    let target = cfg.example.target();
    let opts = AdaptiveOptions {
        theta: cfg.theta,
        dof_budget: cfg.dof_budget.unwrap_or(DEFAULT_DOF_BUDGET),
        strategy: cfg.precond.clone(),
        solver: cfg.solver_options(subdomains(cfg)),
        track_errors: true,
        ..AdaptiveOptions::default()
    };
    let mut runs = Vec::new();
    let mut table = EocTable::new(EocParameter::Rho, &["hminus1_sq", "l2_sq"]);
    for &rho in &cfg.rho_list {
        let initial = TetMesh::build_structured_cube(cfg.initial_n)?;
        match adaptive_solve(initial, &target, rho, &opts, registry) {
            Ok(res) => {
                let last = res.history.last().expect("at least one level");
                table.push(EocRow {
                    rho,
                    h: f64::NAN,
                    n: res.history.len(),
                    dofs: last.dofs,
                    errors: vec![last.hminus1_error_sq, last.l2_error_sq],
                    eoc: vec![],
                    iterations: last.iterations,
                    converged: res.history.iter().all(|l| l.converged),
                    setup_seconds: res.history.iter().map(|l| l.setup_seconds).sum(),
                    solve_seconds: res.history.iter().map(|l| l.solve_seconds).sum(),
                    failure: None,
                });
                runs.push((rho, res.history));
            }
            Err(e) => {
                table.push(failed_eoc_row(rho, cfg.initial_n, 0, 2, &e));
                runs.push((rho, Vec::new()));
            }
        }
    }
    Ok(AdaptiveReport { runs, table })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coupled_resolution_guard() {
        assert_eq!(coupled_resolution(1.0), 1);
        assert_eq!(coupled_resolution(1e-2), 10);
        assert_eq!(coupled_resolution(1e-4), 100);
        assert_eq!(coupled_resolution(1e-3), 32);
    }

    #[test]
    fn rho_one_uses_a_single_cell() {
        let cfg = ExperimentConfig {
            rho_list: vec![1.0, 1e-1],
            ..Default::default()
        };
        let t = run_rho_coupled_table(&cfg, &SolverRegistry::default()).unwrap();
        assert_eq!(t.rows[0].n, 1);
        assert_eq!(t.rows[0].dofs, 0);
        assert!(t.rows[0].ok());
        // u_h = 0: the L2 distance is |target|^2 = 1/8 up to the degree-4 rule
        // on six large tets
        assert!((t.rows[0].errors[1] - 0.125).abs() < 0.02);
        assert_eq!(t.rows[0].errors[0], 0.0);
        assert_eq!(t.failed_rows(), 0);
    }

    #[test]
    fn convergence_rows_per_rho_and_n() {
        let cfg = ExperimentConfig {
            rho_list: vec![1.0, 1e-4],
            n_list: vec![2, 4],
            ..Default::default()
        };
        let t = run_convergence_table(&cfg, &SolverRegistry::default()).unwrap();
        assert_eq!(t.rows.len(), 4);
        assert!(t.rows[1].eoc[0].is_some());
        assert!(t.rows[2].eoc[0].is_none());
        assert!(t.rows.iter().all(|r| r.errors.iter().all(|&e| e > 0.0)));
    }

    #[test]
    fn unknown_precond_is_an_error() {
        let cfg = ExperimentConfig {
            precond: "multigrid".into(),
            ..Default::default()
        };
        assert!(run_precond_bench(&cfg, &SolverRegistry::default()).is_err());
    }

    #[test]
    fn wrong_example_rejected() {
        let cfg = ExperimentConfig::default();
        assert!(run_adaptive_experiment(&cfg, &SolverRegistry::default()).is_err());
        let cfg = ExperimentConfig {
            example: Example::Box,
            ..Default::default()
        };
        assert!(run_convergence_table(&cfg, &SolverRegistry::default()).is_err());
    }

    #[test]
    fn non_convergence_is_a_failed_row() {
        let cfg = ExperimentConfig {
            precond: "identity".into(),
            n_list: vec![6],
            max_iter: 2,
            ..Default::default()
        };
        let t = run_precond_bench(&cfg, &SolverRegistry::default()).unwrap();
        assert_eq!(t.failed_rows(), 1);
    }
}
