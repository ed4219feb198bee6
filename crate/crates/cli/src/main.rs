use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use rdfem::adapt::estimate;
use rdfem::assembly::{recover_control, FemSystem, Solution};
use rdfem::bddc::partition_geometric;
use rdfem::experiments::{
    run_adaptive_experiment, run_convergence_table, run_precond_bench, run_rho_coupled_table,
    write_history_csv, write_history_gnuplot, Example, ExperimentConfig, BENCH_RHO,
};
use rdfem::linalg::mmio;
use rdfem::mesh::{vtk::write_vtk, TetMesh};
use rdfem::solver::SolverRegistry;

/// Benchmarks for P1 finite elements with AMG and BDDC preconditioned CG on
/// `-rho Lap(u) + u = target` in the unit cube.
#[derive(Parser)]
#[command(name = "rdfem", version)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Regularisation parameters, comma separated.
    #[arg(long, global = true, value_delimiter = ',')]
    rho: Option<Vec<f64>>,
    /// Cells per axis of the structured meshes, comma separated.
    #[arg(long, global = true, value_delimiter = ',')]
    n: Option<Vec<usize>>,
    /// Subdomain counts for bddc, comma separated.
    #[arg(long, global = true, value_delimiter = ',')]
    p: Option<Vec<usize>>,
    /// Solver strategy: none, identity, jacobi, sgs, amg or bddc.
    #[arg(long, global = true)]
    precond: Option<String>,
    /// Relative PCG tolerance.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output file; standard output when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Also emit whitespace-separated data blocks for gnuplot.
    #[arg(long, global = true)]
    gnuplot: bool,
    /// Target field: smooth, box or nonzero_bc.
    #[arg(long, global = true)]
    example: Option<Example>,
    /// TOML experiment configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    max_iter: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Leave the timing columns out of the CSV.
    #[arg(long, global = true)]
    no_timing: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Errors against the manufactured solution over h, per rho.
    TableH,
    /// Distances to the target with h coupled to rho.
    TableRho,
    /// Iteration counts and timings over rho, n and p.
    BenchPrecond,
    /// Adaptive refinement runs per rho.
    Adapt {
        #[arg(long)]
        dof_budget: Option<usize>,
        /// Dörfler bulk parameter.
        #[arg(long)]
        theta: Option<f64>,
        /// Cells per axis of the initial mesh.
        #[arg(long)]
        initial_n: Option<usize>,
    },
    /// Solve once and write the mesh with solution fields as legacy VTK.
    ExportVtk {
        /// Also write the system matrix in MatrixMarket format.
        #[arg(long)]
        matrix_market: Option<PathBuf>,
    },
}

fn defaults(cmd: &Command) -> ExperimentConfig {
    let base = ExperimentConfig::default();
    match cmd {
        Command::TableH => ExperimentConfig {
            rho_list: vec![1.0, 1e-4, 1e-8],
            n_list: vec![4, 8, 16, 32],
            ..base
        },
        Command::TableRho => ExperimentConfig {
            rho_list: vec![1.0, 1e-1, 1e-2, 1e-3, 1e-4],
            ..base
        },
        Command::BenchPrecond => ExperimentConfig {
            rho_list: BENCH_RHO.to_vec(),
            n_list: vec![8, 16, 32],
            p: vec![2, 4, 8],
            ..base
        },
        Command::Adapt { .. } => ExperimentConfig {
            example: Example::Box,
            rho_list: vec![1e-1, 1e-2, 1e-3, 1e-4],
            dof_budget: Some(20_000),
            ..base
        },
        Command::ExportVtk { .. } => ExperimentConfig {
            n_list: vec![8],
            ..base
        },
    }
}

fn config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.global.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            ExperimentConfig::from_toml(&text)?
        }
        None => defaults(&cli.command),
    };
    let g = &cli.global;
    if let Some(v) = &g.rho {
        cfg.rho_list = v.clone();
    }
    if let Some(v) = &g.n {
        cfg.n_list = v.clone();
    }
    if let Some(v) = &g.p {
        cfg.p = v.clone();
    }
    if let Some(v) = &g.precond {
        cfg.precond = v.clone();
    }
    if let Some(v) = g.tol {
        cfg.tol = v;
    }
    if let Some(v) = g.threads {
        cfg.threads = v;
    }
    if let Some(v) = &g.out {
        cfg.output = Some(v.clone());
    }
    if let Some(v) = g.example {
        cfg.example = v;
    }
    if let Some(v) = g.max_iter {
        cfg.max_iter = v;
    }
    if let Some(v) = g.seed {
        cfg.seed = v;
    }
    if let Command::Adapt { dof_budget, theta, initial_n } = &cli.command {
        if dof_budget.is_some() {
            cfg.dof_budget = *dof_budget;
        }
        if let Some(t) = theta {
            cfg.theta = *t;
        }
        if let Some(n) = initial_n {
            cfg.initial_n = *n;
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn sink(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

/// `out.csv` -> `out.dat` (or `out_suffix.dat`); `None` stays on stdout.
fn sibling(path: Option<&Path>, suffix: &str, ext: &str) -> Option<PathBuf> {
    path.map(|p| {
        let stem = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        p.with_file_name(format!("{stem}{suffix}.{ext}"))
    })
}

fn run(cli: &Cli) -> Result<usize> {
    let cfg = config(cli)?;
    if cfg.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.threads)
            .build_global()
            .context("configuring the thread pool")?;
    }
    let registry = SolverRegistry::default();
    let out = cfg.output.as_deref();
    let timing = !cli.global.no_timing;
    let gnuplot = cli.global.gnuplot;
    let gp_path = sibling(out, "", "dat");
    match &cli.command {
        Command::TableH | Command::TableRho => {
            let table = if matches!(cli.command, Command::TableH) {
                run_convergence_table(&cfg, &registry)?
            } else {
                run_rho_coupled_table(&cfg, &registry)?
            };
            let mut w = sink(out)?;
            table.write_csv(&mut w, timing)?;
            w.flush()?;
            drop(w);
            if gnuplot {
                let mut g = sink(gp_path.as_deref())?;
                if out.is_none() {
                    writeln!(g)?;
                }
                table.write_gnuplot(&mut g)?;
            }
            Ok(table.failed_rows())
        }
        Command::BenchPrecond => {
            let table = run_precond_bench(&cfg, &registry)?;
            let mut w = sink(out)?;
            table.write_csv(&mut w, timing)?;
            w.flush()?;
            drop(w);
            if gnuplot {
                let mut g = sink(gp_path.as_deref())?;
                if out.is_none() {
                    writeln!(g)?;
                }
                table.write_gnuplot(&mut g)?;
            }
            Ok(table.failed_rows())
        }
        Command::Adapt { .. } => {
            let report = run_adaptive_experiment(&cfg, &registry)?;
            let mut w = sink(out)?;
            write_history_csv(&mut w, &report.runs, timing)?;
            w.flush()?;
            drop(w);
            let mut e = sink(sibling(out, "_eoc", "csv").as_deref())?;
            if out.is_none() {
                writeln!(e)?;
            }
            report.table.write_csv(&mut e, timing)?;
            e.flush()?;
            drop(e);
            if gnuplot {
                let mut g = sink(gp_path.as_deref())?;
                if out.is_none() {
                    writeln!(g)?;
                }
                write_history_gnuplot(&mut g, &report.runs)?;
            }
            Ok(report.failed_rows())
        }
        Command::ExportVtk { matrix_market } => {
            export_vtk(&cfg, &registry, matrix_market.as_deref())?;
            Ok(0)
        }
    }
}

fn export_vtk(cfg: &ExperimentConfig, registry: &SolverRegistry, matrix_market: Option<&Path>) -> Result<()> {
    let (&n, &rho) = match (cfg.n_list.first(), cfg.rho_list.first()) {
        (Some(n), Some(r)) => (n, r),
        _ => bail!("export-vtk needs one n and one rho"),
    };
    let p = cfg.p.first().copied().unwrap_or(4);
    let mesh = TetMesh::build_structured_cube(n)?;
    let target = cfg.example.target();
    let system = FemSystem::build(&mesh, rho, &target)?;
    let solved = registry.solve(&cfg.precond, &mesh, &system, &cfg.solver_options(p))?;
    if !solved.report.converged {
        bail!("solver did not converge in {} iterations", solved.report.iterations);
    }
    let sol = Solution::new(solved.coefficients, &system, &mesh)?;
    let u = sol.nodal_values();
    let ubar: Vec<f64> = mesh.vertices().iter().map(|x| target.eval(x)).collect();
    let z = recover_control(&sol, &target);
    let eta = estimate(&sol, &target)?.per_tet;
    let part: Vec<f64> = if p >= 2 && p <= mesh.n_tets() {
        partition_geometric(&mesh, p)?.owner().iter().map(|&o| o as f64).collect()
    } else {
        vec![0.0; mesh.n_tets()]
    };
    let w = sink(cfg.output.as_deref())?;
    write_vtk(
        w,
        &mesh,
        &[("u", &u), ("target", &ubar), ("control", &z)],
        &[("eta", &eta), ("subdomain", &part)],
    )?;
    if let Some(path) = matrix_market {
        let w = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
        mmio::write_matrix(w, system.matrix(), true)?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(0) => ExitCode::SUCCESS,
        Ok(failed) => {
            eprintln!("rdfem: {failed} row(s) failed");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("rdfem: error: {e:#}");
            ExitCode::from(2)
        }
    }
}
