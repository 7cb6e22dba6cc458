//! Turbo filtering: parallel concatenation of the EKF (full state) with a
//! SIR particle filter (nonlinear substate), exchanging pseudo-measurement
//! messages within each recursion.
//!
//! Two schedules are provided. The first runs the EKF before the PF inside
//! each iteration; the second does the opposite. Both share the same message
//! computations:
//!
//! * `pf_first_mu` weights particles by the measurement likelihood with the
//!   linear substate marginalized over the EKF posterior;
//! * `pmg_ekf` turns the improvement between the EKF's two updates into
//!   per-particle pseudo-measurement weights for the PF;
//! * `pmg_pf` propagates each particle and converts the implied constraint on
//!   the linear substate into a per-particle Gaussian;
//! * `pmc_pf` condenses those Gaussians and the particle cloud into the
//!   single full-state Gaussian consumed by the EKF's second update.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};
use crate::gaussian::GaussianMoment;
use crate::linalg::{floor_eigenvalues, psd_sqrt, spd_factor, spd_logdet, sym_inverse, symmetrize};
use crate::ssm::ClgModel;

use super::ekf::{ekf_first_mu, ekf_second_mu, ekf_time_update, EkfState};
use super::resample::{normalize_log_weights, systematic_resample};
use super::{check_measurement, init_particles, weighted_mean, Estimates, ParticleSet};

/// Pseudo-measurement message handed to the EKF. Flat is the unity message
/// carried into the first iteration; afterwards it is a full-state Gaussian.
/// The moment form is kept because the condensed covariance may be singular.
#[derive(Debug, Clone)]
pub enum PmMessage {
    Flat,
    Gaussian(GaussianMoment),
}

impl PmMessage {
    pub fn is_flat(&self) -> bool {
        matches!(self, PmMessage::Flat)
    }
}

/// Joint turbo-filter state.
#[derive(Debug, Clone)]
pub struct TfState {
    pub ekf: EkfState,
    pub particles: ParticleSet,
    /// Last pseudo-measurement message delivered to the EKF (diagnostic; each
    /// recursion restarts from the flat message).
    pub pm_to_ekf: PmMessage,
}

/// Scheduling variant: EKF-first or PF-first within each iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TfVariant {
    Tf1,
    Tf2,
}

/// Turbo-filter options. The determinant factors of the particle weights are
/// excluded by default; `disable_pm` forces flat pseudo-measurements in both
/// directions, collapsing the concatenation onto the standalone EKF.
#[derive(Debug, Clone)]
pub struct TfOptions {
    pub n_it: usize,
    pub det_factor_ms: bool,
    pub det_factor_pm: bool,
    pub disable_pm: bool,
}

impl Default for TfOptions {
    fn default() -> Self {
        Self {
            n_it: 1,
            det_factor_ms: false,
            det_factor_pm: false,
            disable_pm: false,
        }
    }
}

fn check_particles(points: &[DVector<f64>], d_n: usize, context: &'static str) -> Result<()> {
    if points.is_empty() {
        return Err(Error::EmptyInput(context));
    }
    if let Some(p) = points.iter().find(|p| p.len() != d_n) {
        return Err(Error::DimensionMismatch {
            context,
            expected: d_n,
            got: p.len(),
        });
    }
    Ok(())
}

/// First measurement update of the PF: per-particle log weights
/// `ln N(y; B_j eta_fe2 + g_j, B_j C_fe2 B_j^T + C_e)`, with the linear
/// substate marginalized over `fe2_l`. The `det(C)^(-P/2)` factor is included
/// only when `include_det` is set.
pub fn pf_first_mu<M: ClgModel + ?Sized>(
    points: &[DVector<f64>],
    model: &M,
    l: usize,
    y: &DVector<f64>,
    fe2_l: &GaussianMoment,
    include_det: bool,
) -> Result<Vec<f64>> {
    let dims = model.dims();
    check_measurement(y, dims.p)?;
    check_particles(points, dims.d_n, "pf_first_mu")?;
    let c_e = model.cov_e();
    let mut out = Vec::with_capacity(points.len());
    for xj in points {
        let b = model.b_meas(l, xj);
        let eta_ms = &b * fe2_l.mean() + model.g_meas(l, xj);
        let c_ms = symmetrize(&(&b * fe2_l.cov() * b.transpose() + &c_e));
        let factor = spd_factor(&c_ms, "pf measurement covariance")?;
        let d = y - eta_ms;
        let mut lw = -0.5 * d.dot(&factor.solve(&d));
        if include_det {
            lw -= 0.5 * dims.p as f64 * spd_logdet(&factor);
        }
        out.push(lw);
    }
    Ok(out)
}

/// Pseudo-measurement generation for the PF: the EKF's first- and second-
/// update marginals over the linear substate imply, per particle, a Gaussian
/// for the linear-state increment; its overlap with the increment the
/// particle itself predicts is the particle's log PM weight. Evaluated in the
/// canonical form with the `det^(-D_L/2)` factor optional.
pub fn pmg_ekf<M: ClgModel + ?Sized>(
    points: &[DVector<f64>],
    model: &M,
    l: usize,
    fe1_l: &GaussianMoment,
    fe2_l: &GaussianMoment,
    include_det: bool,
) -> Result<Vec<f64>> {
    let dims = model.dims();
    check_particles(points, dims.d_n, "pmg_ekf")?;
    if fe1_l.dim() != dims.d_l || fe2_l.dim() != dims.d_l {
        return Err(Error::DimensionMismatch {
            context: "pmg_ekf marginals",
            expected: dims.d_l,
            got: fe1_l.dim().max(fe2_l.dim()),
        });
    }
    let cw_l = model.cov_w_lin();
    let w_w = sym_inverse(&cw_l, "linear process precision")?;
    let d_eta = fe2_l.mean() - fe1_l.mean();
    let d_cov = fe2_l.cov() - fe1_l.cov();
    let mut out = Vec::with_capacity(points.len());
    for xj in points {
        let a = model.a_lin(l, xj);
        let f = model.f_lin(l, xj);
        let eta_z = &a * &d_eta + &f;
        let mut c_z = symmetrize(&(&cw_l + &a * &d_cov * a.transpose()));
        let factor_z = match spd_factor(&c_z, "pm z covariance") {
            Ok(fz) => fz,
            Err(_) => {
                // fe2 conditions on more information than fe1, so the
                // difference is PSD in exact arithmetic; repair numerical
                // violations by flooring the eigenvalues.
                c_z = floor_eigenvalues(
                    &c_z,
                    1e-12 * c_z.trace().abs().max(f64::MIN_POSITIVE),
                );
                spd_factor(&c_z, "pm z covariance")?
            }
        };
        let w_z_shift = factor_z.solve(&eta_z);
        let w_pm = symmetrize(&(factor_z.inverse() + &w_w));
        let w_pm_shift = &w_z_shift + &w_w * &f;
        let factor_pm = spd_factor(&w_pm, "pm precision")?;
        let eta_pm = factor_pm.solve(&w_pm_shift);
        let mut lw =
            0.5 * (w_pm_shift.dot(&eta_pm) - eta_z.dot(&w_z_shift) - f.dot(&(&w_w * &f)));
        if include_det {
            let big = spd_factor(&symmetrize(&(&c_z + &cw_l)), "pm det factor")?;
            lw -= 0.5 * dims.d_l as f64 * spd_logdet(&big);
        }
        out.push(lw);
    }
    Ok(out)
}

/// Second measurement update of the PF: combines measurement and PM log
/// weights, normalizes and resamples systematically. Returns the resampled
/// set (uniform weights) together with the normalized weights of the input
/// set.
pub fn pf_second_mu_normalize_resample<R: Rng + ?Sized>(
    particles: &ParticleSet,
    log_w_fe1: &[f64],
    log_w_pm: &[f64],
    l: usize,
    rng: &mut R,
) -> Result<(ParticleSet, Vec<f64>)> {
    let n = particles.len();
    if n == 0 {
        return Err(Error::EmptyInput("pf_second_mu_normalize_resample"));
    }
    if log_w_fe1.len() != n || log_w_pm.len() != n {
        return Err(Error::DimensionMismatch {
            context: "pf_second_mu_normalize_resample",
            expected: n,
            got: log_w_fe1.len().min(log_w_pm.len()),
        });
    }
    let combined: Vec<f64> = log_w_fe1
        .iter()
        .zip(log_w_pm)
        .map(|(a, b)| a + b)
        .collect();
    let normalized =
        normalize_log_weights(&combined).ok_or(Error::AllZeroWeights { step: l })?;
    let indices = systematic_resample(&normalized, rng);
    let points = indices
        .iter()
        .map(|&i| particles.points[i].clone())
        .collect();
    Ok((ParticleSet::uniform(points), normalized))
}

/// Output of [`pmg_pf`]: the predicted particle, the per-particle Gaussian
/// over the linear substate, and how many particles needed the ridge
/// regularization of the PM precision.
#[derive(Debug, Clone)]
pub struct PmgPfOutput {
    pub predicted: Vec<DVector<f64>>,
    pub pm_gaussians: Vec<GaussianMoment>,
    pub regularized: usize,
}

/// Pseudo-measurement generation for the EKF: each (resampled) particle is
/// propagated by marginalizing the nonlinear-substate dynamics over `fe2_l`
/// and sampling; the drawn increment `z = x_new - f_non` constrains the
/// linear substate through `a_non`, giving the Gaussian
/// `W = a_non^T W_w a_non`, `w = a_non^T W_w z` converted to moment form.
/// Rank-deficient `a_non` is repaired with a small ridge and counted.
pub fn pmg_pf<M: ClgModel + ?Sized, R: Rng + ?Sized>(
    points: &[DVector<f64>],
    model: &M,
    l: usize,
    fe2_l: &GaussianMoment,
    rng: &mut R,
) -> Result<PmgPfOutput> {
    let dims = model.dims();
    check_particles(points, dims.d_n, "pmg_pf")?;
    let cw_n = model.cov_w_non();
    let w_w = sym_inverse(&cw_n, "nonlinear process precision")?;
    let mut predicted = Vec::with_capacity(points.len());
    let mut pm_gaussians = Vec::with_capacity(points.len());
    let mut regularized = 0usize;
    for xj in points {
        let a = model.a_non(l, xj);
        let f = model.f_non(l, xj);
        let eta_fp = &a * fe2_l.mean() + &f;
        let c_fp = symmetrize(&(&cw_n + &a * fe2_l.cov() * a.transpose()));
        let sqrt_fp = psd_sqrt(&c_fp, "pm proposal covariance")?;
        let draw = DVector::from_fn(dims.d_n, |_, _| rng.sample(rand_distr::StandardNormal));
        let new_point = eta_fp + sqrt_fp * draw;
        let z = &new_point - &f;
        let w_pm = symmetrize(&(a.transpose() * &w_w * &a));
        let shift = a.transpose() * &w_w * &z;
        let c_pm = match spd_factor(&w_pm, "pm linear precision") {
            Ok(fpm) => fpm.inverse(),
            Err(_) => {
                regularized += 1;
                let ridge = 1e-9 * w_w.trace().abs().max(f64::MIN_POSITIVE);
                let repaired = &w_pm + DMatrix::identity(dims.d_l, dims.d_l) * ridge;
                spd_factor(&repaired, "pm linear precision (ridge)")?.inverse()
            }
        };
        let eta_pm = &c_pm * &shift;
        pm_gaussians.push(GaussianMoment::new(eta_pm, symmetrize(&c_pm))?);
        predicted.push(new_point);
    }
    Ok(PmgPfOutput {
        predicted,
        pm_gaussians,
        regularized,
    })
}

/// Pseudo-measurement conversion: condenses the paired per-particle linear
/// Gaussians and particle values into the single full-state Gaussian message
/// for the EKF, preserving the mixture's first two moments. Block order is
/// linear substate first.
pub fn pmc_pf(
    pm_gaussians: &[GaussianMoment],
    points: &[DVector<f64>],
) -> Result<PmMessage> {
    if pm_gaussians.is_empty() {
        return Err(Error::EmptyInput("pmc_pf"));
    }
    if pm_gaussians.len() != points.len() {
        return Err(Error::DimensionMismatch {
            context: "pmc_pf",
            expected: pm_gaussians.len(),
            got: points.len(),
        });
    }
    let condensed = crate::gaussian::moment_match_refs(
        pm_gaussians.iter().zip(points).map(|(g, x)| (x, g, 1.0)),
    )?;
    Ok(PmMessage::Gaussian(condensed))
}

fn validate_options(opts: &TfOptions) -> Result<()> {
    if opts.n_it == 0 {
        return Err(Error::InvalidParams(
            "turbo filtering needs at least one iteration".to_string(),
        ));
    }
    Ok(())
}

/// One recursion of the EKF-first schedule. Within each iteration the EKF
/// merges the previous iteration's PM, then the PF is weighted, resampled and
/// used to produce the next PM. After the last iteration the EKF absorbs the
/// final PM and both filters emit their predictions.
pub fn tf1_step<M: ClgModel + ?Sized, R: Rng + ?Sized>(
    state: &mut TfState,
    model: &M,
    l: usize,
    y: &DVector<f64>,
    opts: &TfOptions,
    rng: &mut R,
) -> Result<Estimates> {
    validate_options(opts)?;
    let dims = model.dims();
    let n_p = state.particles.len();
    let first = ekf_first_mu(&state.ekf.fp, model, l, y)?;

    let mut pm = PmMessage::Flat;
    let mut particles = std::mem::take(&mut state.particles.points);
    let mut next_particles = Vec::new();
    let mut est_points = Vec::new();
    let mut est_weights = Vec::new();
    for _k in 1..=opts.n_it {
        let (_, fe2_l) = ekf_second_mu(&first, &pm)?;
        let log_fe1 = pf_first_mu(&particles, model, l, y, &fe2_l, opts.det_factor_ms)?;
        let log_pm = if opts.disable_pm {
            vec![0.0; n_p]
        } else {
            pmg_ekf(&particles, model, l, &first.fe1_l, &fe2_l, opts.det_factor_pm)?
        };
        let pset = ParticleSet::uniform(particles);
        let (resampled, w_norm) =
            pf_second_mu_normalize_resample(&pset, &log_fe1, &log_pm, l, rng)?;
        est_points = pset.points;
        est_weights = w_norm;
        let out = pmg_pf(&resampled.points, model, l, &fe2_l, rng)?;
        pm = if opts.disable_pm {
            PmMessage::Flat
        } else {
            pmc_pf(&out.pm_gaussians, &resampled.points)?
        };
        next_particles = out.predicted;
        particles = resampled.points;
    }

    let (fe2_final, _) = ekf_second_mu(&first, &pm)?;
    let est = Estimates {
        linear: fe2_final.mean().rows(0, dims.d_l).into_owned(),
        nonlinear: weighted_mean(&est_points, &est_weights)?,
        ekf_mean: Some(fe2_final.mean().clone()),
    };
    state.ekf.fp = ekf_time_update(&fe2_final, model, l)?;
    state.ekf.fe = fe2_final;
    state.particles = ParticleSet::uniform(next_particles);
    state.pm_to_ekf = pm;
    Ok(est)
}

/// One recursion of the PF-first schedule. Within each iteration the PF is
/// weighted with the latest EKF marginal and the previous iteration's PM
/// weights, resampled and converted into the PM the EKF merges in the same
/// iteration; the PM weights for the next iteration are then regenerated.
/// The final PF weights are recomputed against the last EKF marginal before
/// the predictions are formed.
pub fn tf2_step<M: ClgModel + ?Sized, R: Rng + ?Sized>(
    state: &mut TfState,
    model: &M,
    l: usize,
    y: &DVector<f64>,
    opts: &TfOptions,
    rng: &mut R,
) -> Result<Estimates> {
    validate_options(opts)?;
    let dims = model.dims();
    let n_p = state.particles.len();
    let first = ekf_first_mu(&state.ekf.fp, model, l, y)?;

    let mut fe2 = first.fe1.clone();
    let mut fe2_l = first.fe1_l.clone();
    let mut log_pm_pf = vec![0.0; n_p];
    let mut pm = PmMessage::Flat;
    let mut particles = std::mem::take(&mut state.particles.points);
    let mut next_particles = Vec::new();
    for _k in 1..=opts.n_it {
        let log_fe1 = pf_first_mu(&particles, model, l, y, &fe2_l, opts.det_factor_ms)?;
        let pset = ParticleSet::uniform(particles);
        let (resampled, _) =
            pf_second_mu_normalize_resample(&pset, &log_fe1, &log_pm_pf, l, rng)?;
        let out = pmg_pf(&resampled.points, model, l, &fe2_l, rng)?;
        if !opts.disable_pm {
            pm = pmc_pf(&out.pm_gaussians, &resampled.points)?;
        }
        let (f2, f2l) = ekf_second_mu(&first, &pm)?;
        fe2 = f2;
        fe2_l = f2l;
        log_pm_pf = if opts.disable_pm {
            vec![0.0; n_p]
        } else {
            pmg_ekf(&resampled.points, model, l, &first.fe1_l, &fe2_l, opts.det_factor_pm)?
        };
        next_particles = out.predicted;
        particles = resampled.points;
    }

    // Final PF weights against the last EKF marginal, for the estimate.
    let log_fe1_final = pf_first_mu(&particles, model, l, y, &fe2_l, opts.det_factor_ms)?;
    let combined: Vec<f64> = log_fe1_final
        .iter()
        .zip(&log_pm_pf)
        .map(|(a, b)| a + b)
        .collect();
    let w_final =
        normalize_log_weights(&combined).ok_or(Error::AllZeroWeights { step: l })?;
    let est = Estimates {
        linear: fe2.mean().rows(0, dims.d_l).into_owned(),
        nonlinear: weighted_mean(&particles, &w_final)?,
        ekf_mean: Some(fe2.mean().clone()),
    };
    state.ekf.fp = ekf_time_update(&fe2, model, l)?;
    state.ekf.fe = fe2;
    state.particles = ParticleSet::uniform(next_particles);
    state.pm_to_ekf = pm;
    Ok(est)
}

/// Turbo-filter recursion driver for either schedule.
#[derive(Debug, Clone)]
pub struct TurboFilter {
    pub variant: TfVariant,
    pub opts: TfOptions,
    pub state: TfState,
}

impl TurboFilter {
    /// Initializes the EKF head from the model's initial pdf and draws the
    /// particle cloud from its nonlinear-substate marginal.
    pub fn new<M: ClgModel + ?Sized, R: Rng + ?Sized>(
        model: &M,
        variant: TfVariant,
        opts: TfOptions,
        n_p: usize,
        rng: &mut R,
    ) -> Result<Self> {
        validate_options(&opts)?;
        let dims = model.dims();
        let init = model.init();
        let points = init_particles(&init, dims.d_l, n_p, rng)?;
        Ok(Self {
            variant,
            opts,
            state: TfState {
                ekf: EkfState {
                    fp: init.clone(),
                    fe: init,
                },
                particles: ParticleSet::uniform(points),
                pm_to_ekf: PmMessage::Flat,
            },
        })
    }

    pub fn step<M: ClgModel + ?Sized, R: Rng + ?Sized>(
        &mut self,
        model: &M,
        l: usize,
        y: &DVector<f64>,
        rng: &mut R,
    ) -> Result<Estimates> {
        match self.variant {
            TfVariant::Tf1 => tf1_step(&mut self.state, model, l, y, &self.opts, rng),
            TfVariant::Tf2 => tf2_step(&mut self.state, model, l, y, &self.opts, rng),
        }
    }
}
