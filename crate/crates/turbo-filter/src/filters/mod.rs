//! Filtering algorithms for CLG models: the two turbo filters (an extended
//! Kalman filter over the full state concatenated in parallel with a particle
//! filter over the nonlinear substate, exchanging pseudo-measurements), plus
//! EKF, bootstrap SIR and marginalized particle filter baselines.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::gaussian::GaussianMoment;

pub mod complexity;
pub mod ekf;
pub mod mpf;
pub mod pf;
pub mod resample;
pub mod tf;

pub use complexity::{complexity_estimate, ComplexityInputs};
pub use ekf::{ekf_first_mu, ekf_second_mu, ekf_time_update, Ekf, EkfState, FirstMu};
pub use mpf::{mpf_step, Mpf, MpfState};
pub use pf::SirPf;
pub use resample::systematic_resample;
pub use tf::{
    pf_first_mu, pf_second_mu_normalize_resample, pmc_pf, pmg_ekf, pmg_pf, tf1_step, tf2_step,
    PmMessage, TfOptions, TfState, TfVariant, TurboFilter,
};

/// Particles over the nonlinear substate with a parallel weight vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleSet {
    pub points: Vec<DVector<f64>>,
    pub weights: Vec<f64>,
}

impl ParticleSet {
    /// Wraps points with uniform weights `1/n`.
    pub fn uniform(points: Vec<DVector<f64>>) -> Self {
        let w = 1.0 / points.len().max(1) as f64;
        let weights = vec![w; points.len()];
        Self { points, weights }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Weighted mean of the particle values.
    pub fn weighted_mean(&self) -> Result<DVector<f64>> {
        weighted_mean(&self.points, &self.weights)
    }
}

pub(crate) fn weighted_mean(points: &[DVector<f64>], weights: &[f64]) -> Result<DVector<f64>> {
    let first = points.first().ok_or(Error::EmptyInput("weighted_mean"))?;
    if points.len() != weights.len() {
        return Err(Error::DimensionMismatch {
            context: "weighted_mean",
            expected: points.len(),
            got: weights.len(),
        });
    }
    let mut mean = DVector::zeros(first.len());
    for (x, &w) in points.iter().zip(weights) {
        mean += x * w;
    }
    Ok(mean)
}

/// Per-step filter output. `linear` is the linear-substate estimate,
/// `nonlinear` the nonlinear-substate estimate (for particle-based filters,
/// the weighted particle mean). Filters that also run a full-state Gaussian
/// head expose its mean in `ekf_mean`, whose tail is the Gaussian variant of
/// the nonlinear estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct Estimates {
    pub linear: DVector<f64>,
    pub nonlinear: DVector<f64>,
    pub ekf_mean: Option<DVector<f64>>,
}

impl Estimates {
    pub(crate) fn from_gaussian_mean(mean: &DVector<f64>, d_l: usize) -> Self {
        Self {
            linear: mean.rows(0, d_l).into_owned(),
            nonlinear: mean.rows(d_l, mean.len() - d_l).into_owned(),
            ekf_mean: Some(mean.clone()),
        }
    }
}

pub(crate) fn check_measurement(y: &DVector<f64>, p: usize) -> Result<()> {
    if y.len() != p {
        return Err(Error::DimensionMismatch {
            context: "measurement",
            expected: p,
            got: y.len(),
        });
    }
    Ok(())
}

/// Draws `n` initial particles from the nonlinear-substate marginal of the
/// model's initial pdf.
pub(crate) fn init_particles<R: rand::Rng + ?Sized>(
    init: &GaussianMoment,
    d_l: usize,
    n: usize,
    rng: &mut R,
) -> Result<Vec<DVector<f64>>> {
    if n == 0 {
        return Err(Error::InvalidParams(
            "particle filters need at least one particle".to_string(),
        ));
    }
    let marg = crate::gaussian::marginal_block(init, d_l..init.dim())?;
    (0..n).map(|_| marg.sample(rng)).collect()
}
