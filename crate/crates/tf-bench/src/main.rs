//! Benchmark CLI: Monte Carlo RMSE/execution-time study of the CLG filters
//! on the planar agent model.
//!
//! ```text
//! bench --filter tf1 --np 100 --nit 1 --steps 300 --runs 50 --seed 1 \
//!       [--sweep-np 10,25,50,100,150] [--det-factors] [--out report.csv] \
//!       [--format csv|json] [--config file.json]
//! ```
//!
//! Exit codes: 0 on success, 2 on configuration errors, 3 when every Monte
//! Carlo run aborted.

use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::Parser;

use tf_bench::{
    emit_csv, emit_json, run_monte_carlo, write_reports, BenchError, FileConfig, FilterKind,
    ReportFormat, RunConfig, RunReport,
};

#[derive(Parser, Debug)]
#[command(name = "bench", about = "Monte Carlo benchmark of CLG filters")]
struct Cli {
    /// Filter to run: ekf|mpf|tf1|tf2|pf (comma-separated list accepted).
    #[arg(long)]
    filter: Option<String>,
    /// Number of particles.
    #[arg(long)]
    np: Option<usize>,
    /// Number of turbo iterations per recursion.
    #[arg(long)]
    nit: Option<usize>,
    /// Observation interval length.
    #[arg(long)]
    steps: Option<usize>,
    /// Number of Monte Carlo runs.
    #[arg(long)]
    runs: Option<usize>,
    /// Base seed; per-run seeds are derived from it.
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated particle counts to sweep (overrides --np).
    #[arg(long = "sweep-np")]
    sweep_np: Option<String>,
    /// Include the determinant factors in the turbo-filter weights.
    #[arg(long)]
    det_factors: bool,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output format: csv|json (default csv).
    #[arg(long)]
    format: Option<String>,
    /// JSON config file; CLI flags override file values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Run Monte Carlo runs sequentially (cleanest timings).
    #[arg(long)]
    sequential: bool,
}

fn parse_usize_list(text: &str, what: &str) -> Result<Vec<usize>, BenchError> {
    text.split(',')
        .map(|tok| {
            tok.trim()
                .parse::<usize>()
                .map_err(|_| BenchError::Config(format!("bad {what} entry '{tok}'")))
        })
        .collect()
}

fn build_entries(cli: &Cli) -> Result<(Vec<RunConfig>, Option<PathBuf>, ReportFormat), BenchError> {
    let file = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| BenchError::Config(format!("cannot read config file: {e}")))?;
            FileConfig::from_json(&text)?
        }
        None => FileConfig::default(),
    };

    let filter_text = cli
        .filter
        .clone()
        .or_else(|| file.filter.clone())
        .ok_or_else(|| BenchError::Config("no filter given (use --filter)".to_string()))?;
    let filters: Vec<FilterKind> = filter_text
        .split(',')
        .map(FilterKind::from_str)
        .collect::<Result<_, _>>()?;

    let sweep = match (&cli.sweep_np, &file.sweep_np) {
        (Some(text), _) => Some(parse_usize_list(text, "sweep-np")?),
        (None, Some(list)) => Some(list.clone()),
        (None, None) => None,
    };

    let mut base = RunConfig::new(filters[0]);
    file.apply_params(&mut base.params);
    if let Some(v) = file.n_p {
        base.n_p = v;
    }
    if let Some(v) = file.n_it {
        base.n_it = v;
    }
    if let Some(v) = file.t_steps {
        base.t_steps = v;
    }
    if let Some(v) = file.n_runs {
        base.n_runs = v;
    }
    if let Some(v) = file.base_seed {
        base.base_seed = v;
    }
    if let Some(v) = file.det_factors {
        base.det_factors = v;
    }
    if let Some(v) = file.parallel {
        base.parallel = v;
    }
    if let Some(v) = cli.np {
        base.n_p = v;
    }
    if let Some(v) = cli.nit {
        base.n_it = v;
    }
    if let Some(v) = cli.steps {
        base.t_steps = v;
    }
    if let Some(v) = cli.runs {
        base.n_runs = v;
    }
    if let Some(v) = cli.seed {
        base.base_seed = v;
    }
    if cli.det_factors {
        base.det_factors = true;
    }
    if cli.sequential {
        base.parallel = false;
    }

    let np_values = sweep.unwrap_or_else(|| vec![base.n_p]);
    if np_values.is_empty() {
        return Err(BenchError::Config("empty sweep list".to_string()));
    }
    let mut entries = Vec::new();
    for &filter in &filters {
        for &n_p in &np_values {
            let mut cfg = base.clone();
            cfg.filter = filter;
            cfg.n_p = n_p;
            cfg.validate()?;
            entries.push(cfg);
        }
    }

    let format = match cli.format.clone().or_else(|| file.format.clone()) {
        Some(text) => ReportFormat::from_str(&text)?,
        None => ReportFormat::Csv,
    };
    let out = cli
        .out
        .clone()
        .or_else(|| file.out.as_ref().map(PathBuf::from));
    Ok((entries, out, format))
}

fn run(cli: &Cli) -> Result<ExitCode, BenchError> {
    let (entries, out, format) = build_entries(cli)?;
    let mut reports: Vec<RunReport> = Vec::new();
    let mut aborted_entries = 0usize;
    for cfg in &entries {
        eprintln!(
            "running {} (n_p={}, n_it={}, steps={}, runs={}, seed={})",
            cfg.filter, cfg.n_p, cfg.n_it, cfg.t_steps, cfg.n_runs, cfg.base_seed
        );
        match run_monte_carlo(cfg) {
            Ok(report) => reports.push(report),
            Err(BenchError::AllRunsAborted { n_runs }) => {
                eprintln!("  all {n_runs} runs aborted; entry skipped");
                aborted_entries += 1;
            }
            Err(e) => return Err(e),
        }
    }

    if reports.is_empty() && aborted_entries > 0 {
        return Ok(ExitCode::from(3));
    }
    match &out {
        Some(path) => write_reports(&reports, path, format)?,
        None => {
            let stdout = std::io::stdout().lock();
            match format {
                ReportFormat::Csv => emit_csv(&reports, stdout)?,
                ReportFormat::Json => emit_json(&reports, stdout)?,
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => code,
        Err(BenchError::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
