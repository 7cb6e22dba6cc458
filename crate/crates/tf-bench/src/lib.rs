//! Monte Carlo benchmark harness for the CLG turbo filters and their
//! baselines: seeded trajectory generation, per-run filtering with wall-clock
//! timing of the filter loop only, pooled RMSE aggregation and CSV/JSON
//! report emission.

use std::fmt;

pub mod config;
pub mod report;
pub mod runner;

pub use config::{FileConfig, FilterKind, RunConfig};
pub use report::{emit_csv, emit_json, write_reports, ReportFormat, RunReport, CSV_HEADER};
pub use runner::{compute_rmse, derive_seed, measure_execution_time, run_monte_carlo};

/// Harness-level errors.
#[derive(Debug, Clone, PartialEq)]
pub enum BenchError {
    /// Invalid run configuration.
    Config(String),
    /// Every Monte Carlo run aborted with degenerate particle weights.
    AllRunsAborted { n_runs: usize },
    /// A filter failed for a reason other than weight degeneracy.
    Filter(turbo_filter::Error),
    /// Report output failed.
    Io(String),
}

impl fmt::Display for BenchError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BenchError::Config(msg) => write!(f, "configuration error: {msg}"),
            BenchError::AllRunsAborted { n_runs } => {
                write!(f, "all {n_runs} Monte Carlo runs aborted")
            }
            BenchError::Filter(e) => write!(f, "filter error: {e}"),
            BenchError::Io(msg) => write!(f, "io error: {msg}"),
        }
    }
}

impl std::error::Error for BenchError {}

impl From<turbo_filter::Error> for BenchError {
    fn from(e: turbo_filter::Error) -> Self {
        BenchError::Filter(e)
    }
}
