//! Monte Carlo execution: per-run seed derivation, filter dispatch, timing
//! and RMSE pooling.

use std::time::Instant;

use nalgebra::DVector;
use rand::rngs::StdRng;
use rand::SeedableRng;
use rayon::prelude::*;

use turbo_filter::filters::{Ekf, Estimates, Mpf, SirPf, TfOptions, TfVariant, TurboFilter};
use turbo_filter::ssm::{agent_model, simulate, AgentModel, ClgModel, Trajectory};
use turbo_filter::Error;

use crate::config::{FilterKind, RunConfig};
use crate::report::RunReport;
use crate::BenchError;

/// Derives an independent stream seed from a base seed (splitmix64 of
/// `base + (stream+1) * golden`); run `r` uses streams `2r` (trajectory) and
/// `2r + 1` (filter).
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    let mut z = base.wrapping_add(stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

enum AnyFilter {
    Ekf(Ekf),
    Tf(TurboFilter),
    Mpf(Mpf),
    Pf(SirPf),
}

impl AnyFilter {
    fn build(cfg: &RunConfig, model: &AgentModel, rng: &mut StdRng) -> Result<Self, Error> {
        let tf_opts = |cfg: &RunConfig| TfOptions {
            n_it: cfg.n_it,
            det_factor_ms: cfg.det_factors,
            det_factor_pm: cfg.det_factors,
            disable_pm: false,
        };
        Ok(match cfg.filter {
            FilterKind::Ekf => AnyFilter::Ekf(Ekf::new(model)),
            FilterKind::Tf1 => AnyFilter::Tf(TurboFilter::new(
                model,
                TfVariant::Tf1,
                tf_opts(cfg),
                cfg.n_p,
                rng,
            )?),
            FilterKind::Tf2 => AnyFilter::Tf(TurboFilter::new(
                model,
                TfVariant::Tf2,
                tf_opts(cfg),
                cfg.n_p,
                rng,
            )?),
            FilterKind::Mpf => AnyFilter::Mpf(Mpf::new(model, cfg.n_p, rng)?),
            FilterKind::Pf => AnyFilter::Pf(SirPf::new(model, cfg.n_p, rng)?),
        })
    }

    fn step(
        &mut self,
        model: &AgentModel,
        l: usize,
        y: &DVector<f64>,
        rng: &mut StdRng,
    ) -> Result<Estimates, Error> {
        match self {
            AnyFilter::Ekf(f) => f.step(model, l, y),
            AnyFilter::Tf(f) => f.step(model, l, y, rng),
            AnyFilter::Mpf(f) => f.step(model, l, y, rng),
            AnyFilter::Pf(f) => f.step(model, l, y, rng),
        }
    }
}

struct RunOutcome {
    /// Per-step (linear, nonlinear) estimation errors.
    errors: Vec<(DVector<f64>, DVector<f64>)>,
    secs: f64,
}

/// Runs the configured filter over one freshly simulated trajectory. Returns
/// `Ok(None)` when the run aborts with degenerate particle weights.
fn one_run(
    cfg: &RunConfig,
    model: &AgentModel,
    r: u64,
) -> Result<Option<RunOutcome>, BenchError> {
    let traj: Trajectory = simulate(model, cfg.t_steps, derive_seed(cfg.base_seed, 2 * r))?;
    let mut rng = StdRng::seed_from_u64(derive_seed(cfg.base_seed, 2 * r + 1));
    let mut filter = AnyFilter::build(cfg, model, &mut rng)?;
    let dims = model.dims();

    let mut estimates: Vec<(DVector<f64>, DVector<f64>)> = Vec::with_capacity(cfg.t_steps);
    let start = Instant::now();
    for (i, y) in traj.measurements.iter().enumerate() {
        match filter.step(model, i + 1, y, &mut rng) {
            Ok(est) => estimates.push((est.linear, est.nonlinear)),
            Err(Error::AllZeroWeights { .. }) => return Ok(None),
            Err(e) => return Err(e.into()),
        }
    }
    let secs = start.elapsed().as_secs_f64();

    let errors = estimates
        .into_iter()
        .zip(&traj.states)
        .map(|((xl, xn), truth)| {
            (
                xl - truth.rows(0, dims.d_l),
                xn - truth.rows(dims.d_l, dims.d_n),
            )
        })
        .collect();
    Ok(Some(RunOutcome { errors, secs }))
}

/// Pooled RMSE over runs and steps for the linear and nonlinear error
/// components: `sqrt(sum |e|^2 / (runs * steps))`.
pub fn compute_rmse(
    errors: &[Vec<(DVector<f64>, DVector<f64>)>],
) -> Result<(f64, f64), BenchError> {
    let mut sq_l = 0.0;
    let mut sq_n = 0.0;
    let mut count = 0usize;
    for run in errors {
        for (el, en) in run {
            sq_l += el.norm_squared();
            sq_n += en.norm_squared();
            count += 1;
        }
    }
    if count == 0 {
        return Err(BenchError::Config(
            "compute_rmse needs at least one error sample".to_string(),
        ));
    }
    Ok(((sq_l / count as f64).sqrt(), (sq_n / count as f64).sqrt()))
}

fn median(mut values: Vec<f64>) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n == 0 {
        return 0.0;
    }
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Median wall time of `f` over `reps` repetitions, after one discarded
/// warm-up pass.
pub fn measure_execution_time<F: FnMut()>(mut f: F, reps: usize) -> f64 {
    f();
    let mut times = Vec::with_capacity(reps.max(1));
    for _ in 0..reps.max(1) {
        let start = Instant::now();
        f();
        times.push(start.elapsed().as_secs_f64());
    }
    median(times)
}

/// Runs the full Monte Carlo study for one configuration: `n_runs` runs with
/// per-run seeds derived from the base seed, each on a freshly simulated
/// trajectory. Only the filter loop is timed; a warm-up run is discarded.
/// Aborted runs are excluded from the RMSE and counted.
pub fn run_monte_carlo(cfg: &RunConfig) -> Result<RunReport, BenchError> {
    cfg.validate()?;
    let model = agent_model(cfg.params.clone())
        .map_err(|e| BenchError::Config(format!("model parameters: {e}")))?;

    // Warm-up pass (caches, frequency scaling); result discarded.
    let _ = one_run(cfg, &model, 0)?;

    let outcomes: Vec<Option<RunOutcome>> = if cfg.parallel {
        (0..cfg.n_runs as u64)
            .into_par_iter()
            .map(|r| one_run(cfg, &model, r))
            .collect::<Result<_, _>>()?
    } else {
        (0..cfg.n_runs as u64)
            .map(|r| one_run(cfg, &model, r))
            .collect::<Result<_, _>>()?
    };

    let n_aborted = outcomes.iter().filter(|o| o.is_none()).count();
    let completed: Vec<RunOutcome> = outcomes.into_iter().flatten().collect();
    if completed.is_empty() {
        return Err(BenchError::AllRunsAborted { n_runs: cfg.n_runs });
    }
    let errors: Vec<_> = completed.iter().map(|o| o.errors.clone()).collect();
    let (rmse_l, rmse_n) = compute_rmse(&errors)?;
    let et_total_s = median(completed.iter().map(|o| o.secs).collect());

    Ok(RunReport {
        filter: cfg.filter.to_string(),
        n_p: cfg.n_p,
        n_it: cfg.n_it,
        t_steps: cfg.t_steps,
        n_runs: cfg.n_runs,
        base_seed: cfg.base_seed,
        rmse_l,
        rmse_n,
        et_total_s,
        et_per_step_s: et_total_s / cfg.t_steps as f64,
        n_aborted,
        version: env!("CARGO_PKG_VERSION").to_string(),
    })
}
