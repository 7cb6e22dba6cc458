//! Benchmark reports and their CSV/JSON serializations.

use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use serde::Serialize;

use crate::BenchError;

/// Aggregated result of one benchmark entry.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct RunReport {
    pub filter: String,
    pub n_p: usize,
    pub n_it: usize,
    pub t_steps: usize,
    pub n_runs: usize,
    pub base_seed: u64,
    /// Pooled RMSE of the linear substate (m for the benchmark model).
    pub rmse_l: f64,
    /// Pooled RMSE of the nonlinear substate (m/s for the benchmark model).
    pub rmse_n: f64,
    /// Median over runs of the filter-loop wall time, seconds.
    pub et_total_s: f64,
    pub et_per_step_s: f64,
    /// Runs excluded from the RMSE because every particle weight collapsed.
    pub n_aborted: usize,
    /// Crate version stamp.
    pub version: String,
}

/// Fixed CSV column set (the version stamp lives in the JSON form only).
pub const CSV_HEADER: &str =
    "filter,n_p,n_it,t_steps,n_runs,base_seed,rmse_l,rmse_n,et_total_s,et_per_step_s,n_aborted";

/// Report output format.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
}

impl FromStr for ReportFormat {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, BenchError> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            other => Err(BenchError::Config(format!(
                "unknown format '{other}' (expected csv|json)"
            ))),
        }
    }
}

/// Writes reports as CSV with the fixed column set; the file ends with a
/// newline and an empty report list yields a header-only file.
pub fn emit_csv<W: Write>(reports: &[RunReport], mut out: W) -> Result<(), BenchError> {
    let io_err = |e: std::io::Error| BenchError::Io(e.to_string());
    writeln!(out, "{CSV_HEADER}").map_err(io_err)?;
    for r in reports {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.filter,
            r.n_p,
            r.n_it,
            r.t_steps,
            r.n_runs,
            r.base_seed,
            r.rmse_l,
            r.rmse_n,
            r.et_total_s,
            r.et_per_step_s,
            r.n_aborted
        )
        .map_err(io_err)?;
    }
    Ok(())
}

/// Writes reports as a JSON array mirroring the CSV fields plus the version
/// stamp; the file ends with a newline.
pub fn emit_json<W: Write>(reports: &[RunReport], mut out: W) -> Result<(), BenchError> {
    let io_err = |e: std::io::Error| BenchError::Io(e.to_string());
    serde_json::to_writer_pretty(&mut out, reports)
        .map_err(|e| BenchError::Io(e.to_string()))?;
    writeln!(out).map_err(io_err)?;
    Ok(())
}

/// Writes reports to `path` in the requested format.
pub fn write_reports(
    reports: &[RunReport],
    path: &Path,
    format: ReportFormat,
) -> Result<(), BenchError> {
    let file = std::fs::File::create(path).map_err(|e| BenchError::Io(e.to_string()))?;
    let buf = std::io::BufWriter::new(file);
    match format {
        ReportFormat::Csv => emit_csv(reports, buf),
        ReportFormat::Json => emit_json(reports, buf),
    }
}
