//! Extended Kalman filtering in canonical (information) form.
//!
//! The measurement update adds the measurement information `H W_e H^T` to the
//! prior precision; a second update merges pseudo-measurement information
//! arriving from a concatenated particle filter. The time update propagates
//! through the linearized dynamics.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::gaussian::{
    affine_propagate, marginal_block, product, GaussianCanonical, GaussianMoment,
};
use crate::linalg::{block_diag2, inverse, sym_inverse, symmetrize};
use crate::ssm::{linearize_dynamics, linearize_measurement, ClgModel};

use super::tf::PmMessage;
use super::{check_measurement, Estimates};

/// EKF pair of forward prediction and latest estimate.
#[derive(Debug, Clone)]
pub struct EkfState {
    pub fp: GaussianMoment,
    pub fe: GaussianMoment,
}

/// Output of the first measurement update, kept in both forms: the moment
/// form, the canonical form (reused by the second update) and the marginal
/// over the linear substate.
#[derive(Debug, Clone)]
pub struct FirstMu {
    pub fe1: GaussianMoment,
    pub fe1_can: GaussianCanonical,
    pub fe1_l: GaussianMoment,
    pub d_l: usize,
}

/// First measurement update: linearizes the measurement map at the prediction
/// mean, forms the measurement information and merges it with the prior in
/// canonical form.
pub fn ekf_first_mu<M: ClgModel + ?Sized>(
    fp: &GaussianMoment,
    model: &M,
    l: usize,
    y: &DVector<f64>,
) -> Result<FirstMu> {
    let dims = model.dims();
    check_measurement(y, dims.p)?;
    let (h_t, v) = linearize_measurement(model, l, fp.mean())?;
    let w_e = sym_inverse(&model.cov_e(), "measurement noise precision")?;
    let h_w = h_t.transpose() * &w_e;
    let ms = GaussianCanonical::new(symmetrize(&(&h_w * &h_t)), &h_w * (y - v))?;
    let fe1_can = product(&fp.to_canonical()?, &ms)?;
    let fe1 = fe1_can.to_moment()?;
    let fe1_l = marginal_block(&fe1, 0..dims.d_l)?;
    Ok(FirstMu {
        fe1,
        fe1_can,
        fe1_l,
        d_l: dims.d_l,
    })
}

/// Second measurement update: merges pseudo-measurement information into the
/// first-update posterior. A flat message returns the first-update posterior
/// unchanged. For a proper message the update is evaluated as
/// `C_fe2 = W C_pm`, `eta_fe2 = W (C_pm w_fe1 + eta_pm)` with
/// `W = (C_pm W_fe1 + I)^-1`, which is the canonical-form product written so
/// that a singular pseudo-measurement covariance stays well-defined.
pub fn ekf_second_mu(
    first: &FirstMu,
    pm: &PmMessage,
) -> Result<(GaussianMoment, GaussianMoment)> {
    match pm {
        PmMessage::Flat => Ok((first.fe1.clone(), first.fe1_l.clone())),
        PmMessage::Gaussian(pm_g) => {
            let d = first.fe1.dim();
            if pm_g.dim() != d {
                return Err(Error::DimensionMismatch {
                    context: "ekf_second_mu",
                    expected: d,
                    got: pm_g.dim(),
                });
            }
            let gain = inverse(
                &(pm_g.cov() * first.fe1_can.precision() + DMatrix::identity(d, d)),
                "second MU gain",
            )?;
            let cov = symmetrize(&(&gain * pm_g.cov()));
            let mean = &gain * (pm_g.cov() * first.fe1_can.shift() + pm_g.mean());
            let fe2 = GaussianMoment::new(mean, cov)?;
            let fe2_l = marginal_block(&fe2, 0..first.d_l)?;
            Ok((fe2, fe2_l))
        }
    }
}

/// Time update: propagates the estimate through the dynamics linearized at
/// its mean, adding the block-diagonal process noise.
pub fn ekf_time_update<M: ClgModel + ?Sized>(
    fe: &GaussianMoment,
    model: &M,
    l: usize,
) -> Result<GaussianMoment> {
    let (f_mat, u) = linearize_dynamics(model, l, fe.mean())?;
    let c_w = block_diag2(&model.cov_w_lin(), &model.cov_w_non());
    affine_propagate(fe, &f_mat, &u, &c_w)
}

/// Standalone EKF recursion driver.
#[derive(Debug, Clone)]
pub struct Ekf {
    pub state: EkfState,
}

impl Ekf {
    pub fn new<M: ClgModel + ?Sized>(model: &M) -> Self {
        let init = model.init();
        Self {
            state: EkfState {
                fp: init.clone(),
                fe: init,
            },
        }
    }

    /// One recursion: first measurement update then time update.
    pub fn step<M: ClgModel + ?Sized>(
        &mut self,
        model: &M,
        l: usize,
        y: &DVector<f64>,
    ) -> Result<Estimates> {
        let mu = ekf_first_mu(&self.state.fp, model, l, y)?;
        let est = Estimates::from_gaussian_mean(mu.fe1.mean(), mu.d_l);
        self.state.fe = mu.fe1;
        self.state.fp = ekf_time_update(&self.state.fe, model, l)?;
        Ok(est)
    }
}

/// Textbook Kalman filter in gain form, used as an independent oracle by the
/// unit and acceptance tests.
#[cfg(test)]
pub(crate) mod tests_oracle {
    use super::*;

    pub struct KfOracle {
        pub mean: DVector<f64>,
        pub cov: DMatrix<f64>,
    }

    impl KfOracle {
        pub fn update(&mut self, h: &DMatrix<f64>, r: &DMatrix<f64>, y: &DVector<f64>) {
            let s = h * &self.cov * h.transpose() + r;
            let k = &self.cov * h.transpose() * s.try_inverse().unwrap();
            self.mean = &self.mean + &k * (y - h * &self.mean);
            let i = DMatrix::identity(self.cov.nrows(), self.cov.nrows());
            self.cov = symmetrize(&((i - &k * h) * &self.cov));
        }

        pub fn predict(&mut self, f: &DMatrix<f64>, u: &DVector<f64>, q: &DMatrix<f64>) {
            self.mean = f * &self.mean + u;
            self.cov = symmetrize(&(f * &self.cov * f.transpose() + q));
        }
    }
}
