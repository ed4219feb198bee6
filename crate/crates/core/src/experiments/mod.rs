//! The experiments behind the convergence and robustness tables.

mod config;
mod runners;
mod table;
mod targets;

pub use config::{ExperimentConfig, BENCH_RHO};
pub use runners::{
    coupled_resolution, run_adaptive_experiment, run_convergence_table, run_precond_bench,
    run_rho_coupled_table, AdaptiveReport, DEFAULT_DOF_BUDGET,
};
pub use table::{
    eoc, fmt_e, write_history_csv, write_history_gnuplot, BenchRow, BenchTable, EocParameter, EocRow,
    EocTable,
};
pub use targets::{
    manufactured_exact, target_box, target_nonzero_bc, target_smooth, Example, ManufacturedExact,
};
