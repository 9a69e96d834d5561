//! Benchmark presets, run configuration, evaluation metrics, sweeps and
//! quadrature-rate fitting.

mod config;
mod metrics;
mod quadrature;
mod run;
mod sweep;

pub use config::{ConfigError, RunConfig};
pub use metrics::{
    export_fields, gen_error, read_fields, reference_interface, write_fields, Classifier, EvalGrid, FieldRow,
    GenError, MetricsReport,
};
pub use quadrature::{fit_convergence_rate, mc_quadrature_errors, mc_integrand, MC_EXACT};
pub use run::{
    build_problem, evaluate_run, export_saved_fields, run_example, track_only, HarnessError, Problem, RunOutput, CHECKPOINT,
    FIELDS, INTERFACE_HISTORY, LOSS_LOG, METRICS,
};
pub use sweep::{parse_rows, sweep, table1_rows, write_sweep_csv, SweepRow};
