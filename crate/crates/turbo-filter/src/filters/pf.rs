//! Bootstrap SIR particle filter over the full state (sanity baseline).

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{psd_sqrt, sym_inverse};
use crate::ssm::{compose_f, compose_h, ClgModel};

use super::resample::{normalize_log_weights, systematic_resample};
use super::{check_measurement, weighted_mean, Estimates};

/// Full-state bootstrap particle filter: proposal from the dynamics, weights
/// from the measurement likelihood, systematic resampling every step.
#[derive(Debug, Clone)]
pub struct SirPf {
    pub particles: Vec<DVector<f64>>,
    w_e: DMatrix<f64>,
    wl_factor: DMatrix<f64>,
    wn_factor: DMatrix<f64>,
}

impl SirPf {
    /// Requires a positive definite measurement noise covariance; process
    /// noise may be singular.
    pub fn new<M: ClgModel + ?Sized, R: Rng + ?Sized>(
        model: &M,
        n_p: usize,
        rng: &mut R,
    ) -> Result<Self> {
        if n_p == 0 {
            return Err(Error::InvalidParams(
                "particle filters need at least one particle".to_string(),
            ));
        }
        let w_e = sym_inverse(&model.cov_e(), "sir measurement precision").map_err(|_| {
            Error::InvalidParams(
                "SIR filter requires a positive definite measurement noise covariance"
                    .to_string(),
            )
        })?;
        let wl_factor = psd_sqrt(&model.cov_w_lin(), "sir cov_w_lin")?;
        let wn_factor = psd_sqrt(&model.cov_w_non(), "sir cov_w_non")?;
        let init = model.init();
        let particles = (0..n_p)
            .map(|_| init.sample(rng))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            particles,
            w_e,
            wl_factor,
            wn_factor,
        })
    }

    pub fn step<M: ClgModel + ?Sized, R: Rng + ?Sized>(
        &mut self,
        model: &M,
        l: usize,
        y: &DVector<f64>,
        rng: &mut R,
    ) -> Result<Estimates> {
        let dims = model.dims();
        check_measurement(y, dims.p)?;
        let log_w: Vec<f64> = self
            .particles
            .iter()
            .map(|x| {
                let d = y - compose_h(model, l, x)?;
                Ok(-0.5 * d.dot(&(&self.w_e * &d)))
            })
            .collect::<Result<_>>()?;
        let weights = normalize_log_weights(&log_w).ok_or(Error::AllZeroWeights { step: l })?;
        let mean = weighted_mean(&self.particles, &weights)?;

        let indices = systematic_resample(&weights, rng);
        let resampled: Vec<DVector<f64>> = indices
            .iter()
            .map(|&i| self.particles[i].clone())
            .collect();
        self.particles = resampled
            .iter()
            .map(|x| {
                let mut next = compose_f(model, l, x)?;
                let zl = DVector::from_fn(dims.d_l, |_, _| rng.sample(StandardNormal));
                let zn = DVector::from_fn(dims.d_n, |_, _| rng.sample(StandardNormal));
                let mut lin = next.rows_mut(0, dims.d_l);
                lin += &self.wl_factor * zl;
                let mut non = next.rows_mut(dims.d_l, dims.d_n);
                non += &self.wn_factor * zn;
                Ok(next)
            })
            .collect::<Result<_>>()?;

        Ok(Estimates {
            linear: mean.rows(0, dims.d_l).into_owned(),
            nonlinear: mean.rows(dims.d_l, dims.d_n).into_owned(),
            ekf_mean: None,
        })
    }
}
