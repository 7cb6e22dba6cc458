//! Marginalized (Rao-Blackwellized) particle filter baseline: a particle
//! filter over the nonlinear substate with one Kalman filter per particle
//! over the linear substate. Each recursion weights the particles with the
//! marginalized measurement likelihood, updates every Kalman filter with the
//! real measurement, resamples, propagates each particle, feeds the implied
//! linear-state constraint back as a pseudo-measurement and finally runs the
//! per-particle Kalman time update.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{psd_sqrt, spd_factor, spd_logdet, sym_inverse, symmetrize};
use crate::ssm::ClgModel;

use super::resample::{normalize_log_weights, systematic_resample};
use super::{check_measurement, init_particles, weighted_mean, Estimates};

/// Particles over the nonlinear substate, each carrying a Kalman mean and
/// covariance over the linear substate.
#[derive(Debug, Clone)]
pub struct MpfState {
    pub particles: Vec<DVector<f64>>,
    pub kf_means: Vec<DVector<f64>>,
    pub kf_covs: Vec<DMatrix<f64>>,
}

/// Marginalized particle filter driver.
#[derive(Debug, Clone)]
pub struct Mpf {
    pub state: MpfState,
}

impl Mpf {
    /// Draws particles from the nonlinear marginal of the initial pdf and
    /// initializes each Kalman filter with the conditional of the linear
    /// substate given the drawn particle (the plain marginal when the
    /// nonlinear block is singular).
    pub fn new<M: ClgModel + ?Sized, R: Rng + ?Sized>(
        model: &M,
        n_p: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let dims = model.dims();
        let init = model.init();
        let particles = init_particles(&init, dims.d_l, n_p, rng)?;
        let eta_l = init.mean().rows(0, dims.d_l).into_owned();
        let eta_n = init.mean().rows(dims.d_l, dims.d_n).into_owned();
        let c_ll = init.cov().view((0, 0), (dims.d_l, dims.d_l)).into_owned();
        let c_ln = init
            .cov()
            .view((0, dims.d_l), (dims.d_l, dims.d_n))
            .into_owned();
        let c_nn = init
            .cov()
            .view((dims.d_l, dims.d_l), (dims.d_n, dims.d_n))
            .into_owned();
        let conditional = sym_inverse(&c_nn, "init nonlinear block")
            .ok()
            .map(|w_nn| {
                let gain = &c_ln * w_nn;
                let cov = symmetrize(&(&c_ll - &gain * c_ln.transpose()));
                (gain, cov)
            });
        let (kf_means, kf_covs) = match conditional {
            Some((gain, cov)) => (
                particles
                    .iter()
                    .map(|x| &eta_l + &gain * (x - &eta_n))
                    .collect(),
                vec![cov; n_p],
            ),
            None => (vec![eta_l; n_p], vec![c_ll; n_p]),
        };
        Ok(Self {
            state: MpfState {
                particles,
                kf_means,
                kf_covs,
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
        mpf_step(&mut self.state, model, l, y, rng)
    }
}

/// One full MPF recursion; returns the (linear, nonlinear) estimates for the
/// current step.
pub fn mpf_step<M: ClgModel + ?Sized, R: Rng + ?Sized>(
    state: &mut MpfState,
    model: &M,
    l: usize,
    y: &DVector<f64>,
    rng: &mut R,
) -> Result<Estimates> {
    let dims = model.dims();
    check_measurement(y, dims.p)?;
    let n_p = state.particles.len();
    if n_p == 0 || state.kf_means.len() != n_p || state.kf_covs.len() != n_p {
        return Err(Error::EmptyInput("mpf_step"));
    }
    let c_e = model.cov_e();
    let cw_l = model.cov_w_lin();
    let cw_n = model.cov_w_non();

    // Measurement update: particle weights from the marginalized likelihood,
    // then the per-particle Kalman measurement update.
    let mut log_w = Vec::with_capacity(n_p);
    let mut cached = Vec::with_capacity(n_p);
    for j in 0..n_p {
        let b = model.b_meas(l, &state.particles[j]);
        let g = model.g_meas(l, &state.particles[j]);
        let s = symmetrize(&(&b * &state.kf_covs[j] * b.transpose() + &c_e));
        let factor = spd_factor(&s, "mpf innovation covariance")?;
        let innovation = y - (&b * &state.kf_means[j] + g);
        log_w.push(-0.5 * (innovation.dot(&factor.solve(&innovation)) + spd_logdet(&factor)));
        cached.push((b, factor.inverse(), innovation));
    }
    let weights = normalize_log_weights(&log_w).ok_or(Error::AllZeroWeights { step: l })?;
    let x_n_hat = weighted_mean(&state.particles, &weights)?;

    for j in 0..n_p {
        let (b, s_inv, innovation) = &cached[j];
        let gain = &state.kf_covs[j] * b.transpose() * s_inv;
        state.kf_means[j] += &gain * innovation;
        state.kf_covs[j] = symmetrize(&(&state.kf_covs[j] - &gain * b * &state.kf_covs[j]));
    }
    let x_l_hat = weighted_mean(&state.kf_means, &weights)?;

    // Resampling with replacement, every step.
    let indices = systematic_resample(&weights, rng);
    state.particles = indices
        .iter()
        .map(|&i| state.particles[i].clone())
        .collect();
    state.kf_means = indices.iter().map(|&i| state.kf_means[i].clone()).collect();
    state.kf_covs = indices.iter().map(|&i| state.kf_covs[i].clone()).collect();

    // Time update: propagate each particle, absorb the implied linear-state
    // pseudo-measurement, then push the Kalman filter through the dynamics.
    for j in 0..n_p {
        let xj = state.particles[j].clone();
        let a_n = model.a_non(l, &xj);
        let f_n = model.f_non(l, &xj);
        let q = symmetrize(&(&a_n * &state.kf_covs[j] * a_n.transpose() + &cw_n));
        let sqrt_q = psd_sqrt(&q, "mpf proposal covariance")?;
        let draw = DVector::from_fn(dims.d_n, |_, _| rng.sample(rand_distr::StandardNormal));
        let new_point = &a_n * &state.kf_means[j] + &f_n + sqrt_q * draw;
        let z = &new_point - f_n;
        if a_n.amax() > 0.0 {
            let q_inv = spd_factor(&q, "mpf pm innovation")?.inverse();
            let gain = &state.kf_covs[j] * a_n.transpose() * &q_inv;
            let correction = &gain * (&z - &a_n * &state.kf_means[j]);
            state.kf_means[j] += correction;
            state.kf_covs[j] =
                symmetrize(&(&state.kf_covs[j] - &gain * &a_n * &state.kf_covs[j]));
        }
        let a_l = model.a_lin(l, &xj);
        let f_l = model.f_lin(l, &xj);
        state.kf_means[j] = &a_l * &state.kf_means[j] + f_l;
        state.kf_covs[j] =
            symmetrize(&(&a_l * &state.kf_covs[j] * a_l.transpose() + &cw_l));
        state.particles[j] = new_point;
    }

    Ok(Estimates {
        linear: x_l_hat,
        nonlinear: x_n_hat,
        ekf_mean: None,
    })
}
