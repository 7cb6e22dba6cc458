//! Planar agent benchmark model.
//!
//! An agent moves on a plane with state `x = [p; v]` (position, velocity).
//! Velocity follows a first-order autoregression with forgetting factor `rho`
//! plus the contribution of a force with two terms: a restoring term
//! `-(a0/d0) p` pointing at the origin and a cubic speed-dependent resistance
//! `-a0_tilde (|v|/v0)^3 v/|v|`. Position integrates velocity with the same
//! force. The measurement is `[p; |v|]` in noise.
//!
//! With `x_lin = p` and `x_non = v` this is a CLG model:
//!
//! ```text
//! a_lin = (1 - (a0/d0) Ts^2 / 2) I      f_lin(v) = v Ts - (a0_tilde Ts^2 / (2 v0^3)) |v|^2 v
//! a_non = -(a0/d0) Ts I                 f_non(v) = rho v - (a0_tilde Ts / v0^3) |v|^2 v
//! b     = [I; 0]                        g(v)     = [0, 0, |v|]
//! ```

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::gaussian::GaussianMoment;

use super::{ClgDims, ClgModel};

/// Speed below which the velocity-force term and the speed Jacobian row are
/// set to zero; `v/|v|` is undefined at the origin and the set is removable.
pub const V_EPS: f64 = 1e-9;

/// Parameters of the agent model. Distances in metres, times in seconds.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentParams {
    /// Velocity forgetting factor, strictly inside (0, 1).
    pub rho: f64,
    /// Sampling interval.
    pub t_s: f64,
    /// Position process noise std.
    pub sigma_p: f64,
    /// Position measurement noise std.
    pub sigma_ep: f64,
    /// Speed measurement noise std.
    pub sigma_ev: f64,
    /// Restoring force scale.
    pub a0: f64,
    /// Reference distance of the restoring force.
    pub d0: f64,
    /// Resistance force scale.
    pub a0_tilde: f64,
    /// Reference speed of the resistance force.
    pub v0: f64,
    /// Initial position.
    pub p_init: [f64; 2],
    /// Initial velocity.
    pub v_init: [f64; 2],
    /// Scale applied to the default initial covariance
    /// `diag(sigma_ep^2, sigma_ep^2, sigma_ev^2, sigma_ev^2)`.
    pub init_cov_scale: f64,
}

impl AgentParams {
    /// The benchmark parameter set used throughout the accuracy/runtime study.
    pub fn paper() -> Self {
        Self {
            rho: 0.99,
            t_s: 0.1,
            sigma_p: 0.01,
            sigma_ep: 5e-2,
            sigma_ev: 5e-2,
            a0: 1.5,
            d0: 0.5,
            a0_tilde: 0.05,
            v0: 1.0,
            p_init: [5.0, 8.0],
            v_init: [4.0, 4.0],
            init_cov_scale: 1.0,
        }
    }

    fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if !(self.rho > 0.0 && self.rho < 1.0) {
            problems.push(format!("rho={} outside (0, 1)", self.rho));
        }
        if self.t_s <= 0.0 {
            problems.push(format!("t_s={} must be positive", self.t_s));
        }
        for (name, v) in [
            ("sigma_p", self.sigma_p),
            ("sigma_ep", self.sigma_ep),
            ("sigma_ev", self.sigma_ev),
        ] {
            if v <= 0.0 {
                problems.push(format!("{name}={v} must be positive"));
            }
        }
        if self.d0 <= 0.0 {
            problems.push(format!("d0={} must be positive", self.d0));
        }
        if self.v0 <= 0.0 {
            problems.push(format!("v0={} must be positive", self.v0));
        }
        if self.a0 < 0.0 || self.a0_tilde < 0.0 {
            problems.push("force scales must be nonnegative".to_string());
        }
        if self.init_cov_scale <= 0.0 {
            problems.push(format!(
                "init_cov_scale={} must be positive",
                self.init_cov_scale
            ));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidParams(problems.join("; ")))
        }
    }
}

/// The agent model with its CLG slot assignment.
#[derive(Debug, Clone)]
pub struct AgentModel {
    params: AgentParams,
    a_lin_coeff: f64,
    a_non_coeff: f64,
    /// `a0_tilde * Ts^2 / (2 v0^3)`, coefficient of `|v|^2 v` in `f_lin`.
    c_lin: f64,
    /// `a0_tilde * Ts / v0^3`, coefficient of `|v|^2 v` in `f_non`.
    c_non: f64,
    cw_l: DMatrix<f64>,
    cw_n: DMatrix<f64>,
    ce: DMatrix<f64>,
    init: GaussianMoment,
}

/// Builds the agent model, validating the parameters.
pub fn agent_model(params: AgentParams) -> Result<AgentModel> {
    params.validate()?;
    let ratio = params.a0 / params.d0;
    let a_lin_coeff = 1.0 - ratio * params.t_s * params.t_s / 2.0;
    let a_non_coeff = -ratio * params.t_s;
    let c_lin = params.a0_tilde * params.t_s * params.t_s / (2.0 * params.v0.powi(3));
    let c_non = params.a0_tilde * params.t_s / params.v0.powi(3);
    let cw_l = DMatrix::identity(2, 2) * params.sigma_p.powi(2);
    let cw_n = DMatrix::identity(2, 2) * (1.0 - params.rho).powi(2);
    let ce = DMatrix::from_diagonal(&DVector::from_vec(vec![
        params.sigma_ep.powi(2),
        params.sigma_ep.powi(2),
        params.sigma_ev.powi(2),
    ]));
    let init_mean = DVector::from_vec(vec![
        params.p_init[0],
        params.p_init[1],
        params.v_init[0],
        params.v_init[1],
    ]);
    let init_cov = DMatrix::from_diagonal(&DVector::from_vec(vec![
        params.sigma_ep.powi(2),
        params.sigma_ep.powi(2),
        params.sigma_ev.powi(2),
        params.sigma_ev.powi(2),
    ])) * params.init_cov_scale;
    let init = GaussianMoment::new(init_mean, init_cov)?;
    Ok(AgentModel {
        params,
        a_lin_coeff,
        a_non_coeff,
        c_lin,
        c_non,
        cw_l,
        cw_n,
        ce,
        init,
    })
}

impl AgentModel {
    pub fn params(&self) -> &AgentParams {
        &self.params
    }

    /// `|v|^2 v`, zeroed below the speed floor.
    fn cubic_term(v: &DVector<f64>) -> DVector<f64> {
        let speed = v.norm();
        if speed < V_EPS {
            DVector::zeros(2)
        } else {
            v * speed * speed
        }
    }

    /// Jacobian of `|v|^2 v`, zeroed below the speed floor.
    fn cubic_jacobian(v: &DVector<f64>) -> DMatrix<f64> {
        let speed = v.norm();
        if speed < V_EPS {
            DMatrix::zeros(2, 2)
        } else {
            DMatrix::identity(2, 2) * (speed * speed) + v * v.transpose() * 2.0
        }
    }
}

impl ClgModel for AgentModel {
    fn dims(&self) -> ClgDims {
        ClgDims {
            d_l: 2,
            d_n: 2,
            p: 3,
        }
    }

    fn a_lin(&self, _l: usize, _xn: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::identity(2, 2) * self.a_lin_coeff
    }

    fn f_lin(&self, _l: usize, xn: &DVector<f64>) -> DVector<f64> {
        xn * self.params.t_s - Self::cubic_term(xn) * self.c_lin
    }

    fn a_non(&self, _l: usize, _xn: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::identity(2, 2) * self.a_non_coeff
    }

    fn f_non(&self, _l: usize, xn: &DVector<f64>) -> DVector<f64> {
        xn * self.params.rho - Self::cubic_term(xn) * self.c_non
    }

    fn b_meas(&self, _l: usize, _xn: &DVector<f64>) -> DMatrix<f64> {
        let mut b = DMatrix::zeros(3, 2);
        b[(0, 0)] = 1.0;
        b[(1, 1)] = 1.0;
        b
    }

    fn g_meas(&self, _l: usize, xn: &DVector<f64>) -> DVector<f64> {
        DVector::from_vec(vec![0.0, 0.0, xn.norm()])
    }

    fn cov_w_lin(&self) -> DMatrix<f64> {
        self.cw_l.clone()
    }

    fn cov_w_non(&self) -> DMatrix<f64> {
        self.cw_n.clone()
    }

    fn cov_e(&self) -> DMatrix<f64> {
        self.ce.clone()
    }

    fn init(&self) -> GaussianMoment {
        self.init.clone()
    }

    fn jac_dyn_non(&self, _l: usize, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        let v = x.rows(2, 2).into_owned();
        let cubic = Self::cubic_jacobian(&v);
        let mut jac = DMatrix::zeros(4, 2);
        jac.view_mut((0, 0), (2, 2))
            .copy_from(&(DMatrix::identity(2, 2) * self.params.t_s - &cubic * self.c_lin));
        jac.view_mut((2, 0), (2, 2))
            .copy_from(&(DMatrix::identity(2, 2) * self.params.rho - &cubic * self.c_non));
        Ok(jac)
    }

    fn jac_meas_non(&self, _l: usize, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        let v = x.rows(2, 2).into_owned();
        let mut jac = DMatrix::zeros(3, 2);
        let speed = v.norm();
        if speed >= V_EPS {
            jac.view_mut((2, 0), (1, 2))
                .copy_from(&(v.transpose() / speed));
        }
        Ok(jac)
    }
}
