//! Conditionally linear Gaussian state-space models.
//!
//! The hidden state `x = [x_lin; x_non]` splits into a linear substate (first
//! `d_l` entries) and a nonlinear substate (last `d_n` entries). Conditioned
//! on the nonlinear substate, both the state update and the measurement are
//! affine in the linear substate with Gaussian noise:
//!
//! ```text
//! x_lin'  = a_lin(l, x_non) x_lin + f_lin(l, x_non) + w_lin
//! x_non'  = a_non(l, x_non) x_lin + f_non(l, x_non) + w_non
//! y       = b_meas(l, x_non) x_lin + g_meas(l, x_non) + e
//! ```

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::gaussian::GaussianMoment;

pub mod agent;
pub mod sim;

pub use agent::{agent_model, AgentModel, AgentParams};
pub use sim::{simulate, Trajectory};

/// State and measurement dimensions of a CLG model. Both substates must be
/// nonempty.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClgDims {
    pub d_l: usize,
    pub d_n: usize,
    pub p: usize,
}

impl ClgDims {
    pub fn new(d_l: usize, d_n: usize, p: usize) -> Result<Self> {
        if d_l == 0 || d_n == 0 || p == 0 {
            return Err(Error::InvalidParams(format!(
                "CLG dimensions must be positive (d_l={d_l}, d_n={d_n}, p={p})"
            )));
        }
        Ok(Self { d_l, d_n, p })
    }

    /// Full state dimension.
    pub fn d(&self) -> usize {
        self.d_l + self.d_n
    }
}

/// Evaluation slots of a CLG model. All covariance accessors must return
/// symmetric PSD matrices; slot output shapes must match [`ClgDims`].
///
/// The Jacobian slots have central finite-difference defaults; models with
/// cheap closed forms should override them.
pub trait ClgModel {
    fn dims(&self) -> ClgDims;

    /// `a_lin(l, x_non)`: `d_l x d_l` coefficient of the linear-substate update.
    fn a_lin(&self, l: usize, xn: &DVector<f64>) -> DMatrix<f64>;
    /// `f_lin(l, x_non)`: `d_l` drift of the linear-substate update.
    fn f_lin(&self, l: usize, xn: &DVector<f64>) -> DVector<f64>;
    /// `a_non(l, x_non)`: `d_n x d_l` coefficient of the nonlinear-substate update.
    fn a_non(&self, l: usize, xn: &DVector<f64>) -> DMatrix<f64>;
    /// `f_non(l, x_non)`: `d_n` drift of the nonlinear-substate update.
    fn f_non(&self, l: usize, xn: &DVector<f64>) -> DVector<f64>;
    /// `b_meas(l, x_non)`: `p x d_l` measurement coefficient.
    fn b_meas(&self, l: usize, xn: &DVector<f64>) -> DMatrix<f64>;
    /// `g_meas(l, x_non)`: `p` measurement offset.
    fn g_meas(&self, l: usize, xn: &DVector<f64>) -> DVector<f64>;

    /// Process noise covariance of the linear substate.
    fn cov_w_lin(&self) -> DMatrix<f64>;
    /// Process noise covariance of the nonlinear substate.
    fn cov_w_non(&self) -> DMatrix<f64>;
    /// Measurement noise covariance.
    fn cov_e(&self) -> DMatrix<f64>;
    /// Initial state distribution `f(x_1)`.
    fn init(&self) -> GaussianMoment;

    /// `d x d_n` Jacobian of the full transition map with respect to the
    /// nonlinear substate, evaluated at the full state `x`.
    fn jac_dyn_non(&self, l: usize, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        fd_jacobian(self.dims(), x, |xx| compose_f(self, l, xx))
    }

    /// `p x d_n` Jacobian of the measurement map with respect to the
    /// nonlinear substate, evaluated at the full state `x`.
    fn jac_meas_non(&self, l: usize, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        fd_jacobian(self.dims(), x, |xx| compose_h(self, l, xx))
    }
}

fn split_state(dims: ClgDims, x: &DVector<f64>) -> Result<(DVector<f64>, DVector<f64>)> {
    if x.len() != dims.d() {
        return Err(Error::DimensionMismatch {
            context: "state split",
            expected: dims.d(),
            got: x.len(),
        });
    }
    let xl = x.rows(0, dims.d_l).into_owned();
    let xn = x.rows(dims.d_l, dims.d_n).into_owned();
    Ok((xl, xn))
}

fn check_shape(rows: usize, cols: usize, m: &DMatrix<f64>, context: &'static str) -> Result<()> {
    if m.nrows() != rows || m.ncols() != cols {
        return Err(Error::DimensionMismatch {
            context,
            expected: rows * cols,
            got: m.nrows() * m.ncols(),
        });
    }
    Ok(())
}

/// Full transition map `f(x)`: the stacked linear/nonlinear substate updates.
pub fn compose_f<M: ClgModel + ?Sized>(
    model: &M,
    l: usize,
    x: &DVector<f64>,
) -> Result<DVector<f64>> {
    let dims = model.dims();
    let (xl, xn) = split_state(dims, x)?;
    let a_l = model.a_lin(l, &xn);
    let a_n = model.a_non(l, &xn);
    check_shape(dims.d_l, dims.d_l, &a_l, "a_lin shape")?;
    check_shape(dims.d_n, dims.d_l, &a_n, "a_non shape")?;
    let f_l = model.f_lin(l, &xn);
    let f_n = model.f_non(l, &xn);
    if f_l.len() != dims.d_l || f_n.len() != dims.d_n {
        return Err(Error::DimensionMismatch {
            context: "f slot shape",
            expected: dims.d(),
            got: f_l.len() + f_n.len(),
        });
    }
    let mut out = DVector::zeros(dims.d());
    out.rows_mut(0, dims.d_l).copy_from(&(a_l * &xl + f_l));
    out.rows_mut(dims.d_l, dims.d_n)
        .copy_from(&(a_n * &xl + f_n));
    Ok(out)
}

/// Full measurement map `h(x) = b_meas(x_non) x_lin + g_meas(x_non)`.
pub fn compose_h<M: ClgModel + ?Sized>(
    model: &M,
    l: usize,
    x: &DVector<f64>,
) -> Result<DVector<f64>> {
    let dims = model.dims();
    let (xl, xn) = split_state(dims, x)?;
    let b = model.b_meas(l, &xn);
    check_shape(dims.p, dims.d_l, &b, "b_meas shape")?;
    let g = model.g_meas(l, &xn);
    if g.len() != dims.p {
        return Err(Error::DimensionMismatch {
            context: "g_meas shape",
            expected: dims.p,
            got: g.len(),
        });
    }
    Ok(b * xl + g)
}

fn fd_jacobian<F>(dims: ClgDims, x: &DVector<f64>, f: F) -> Result<DMatrix<f64>>
where
    F: Fn(&DVector<f64>) -> Result<DVector<f64>>,
{
    let probe = f(x)?;
    let mut jac = DMatrix::zeros(probe.len(), dims.d_n);
    for k in 0..dims.d_n {
        let i = dims.d_l + k;
        let h = 1e-6 * x[i].abs().max(1.0);
        let mut hi = x.clone();
        hi[i] += h;
        let mut lo = x.clone();
        lo[i] -= h;
        let col = (f(&hi)? - f(&lo)?) / (2.0 * h);
        jac.set_column(k, &col);
    }
    Ok(jac)
}

/// First-order expansion of the transition and measurement maps: `f_mat` and
/// `u_vec` expand the dynamics around `x_fe`, `h_t` (the `p x d` measurement
/// Jacobian) and `v_vec` expand the measurement around `x_fp`, with
/// `u = f(x_fe) - F x_fe` and `v = h(x_fp) - H^T x_fp` holding exactly.
#[derive(Debug, Clone)]
pub struct Linearization {
    pub f_mat: DMatrix<f64>,
    pub u_vec: DVector<f64>,
    pub h_t: DMatrix<f64>,
    pub v_vec: DVector<f64>,
}

/// Dynamics half of [`linearize`]: `(F, u)` at the estimate `x_fe`.
pub fn linearize_dynamics<M: ClgModel + ?Sized>(
    model: &M,
    l: usize,
    x_fe: &DVector<f64>,
) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let dims = model.dims();
    let (_, xn) = split_state(dims, x_fe)?;
    let mut f_mat = DMatrix::zeros(dims.d(), dims.d());
    f_mat
        .view_mut((0, 0), (dims.d_l, dims.d_l))
        .copy_from(&model.a_lin(l, &xn));
    f_mat
        .view_mut((dims.d_l, 0), (dims.d_n, dims.d_l))
        .copy_from(&model.a_non(l, &xn));
    f_mat
        .view_mut((0, dims.d_l), (dims.d(), dims.d_n))
        .copy_from(&model.jac_dyn_non(l, x_fe)?);
    let u_vec = compose_f(model, l, x_fe)? - &f_mat * x_fe;
    Ok((f_mat, u_vec))
}

/// Measurement half of [`linearize`]: `(H^T, v)` at the prediction `x_fp`.
pub fn linearize_measurement<M: ClgModel + ?Sized>(
    model: &M,
    l: usize,
    x_fp: &DVector<f64>,
) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let dims = model.dims();
    let (_, xn) = split_state(dims, x_fp)?;
    let mut h_t = DMatrix::zeros(dims.p, dims.d());
    h_t.view_mut((0, 0), (dims.p, dims.d_l))
        .copy_from(&model.b_meas(l, &xn));
    h_t.view_mut((0, dims.d_l), (dims.p, dims.d_n))
        .copy_from(&model.jac_meas_non(l, x_fp)?);
    let v_vec = compose_h(model, l, x_fp)? - &h_t * x_fp;
    Ok((h_t, v_vec))
}

/// Linearizes the dynamics around `x_fe` and the measurement around `x_fp`.
pub fn linearize<M: ClgModel + ?Sized>(
    model: &M,
    l: usize,
    x_fe: &DVector<f64>,
    x_fp: &DVector<f64>,
) -> Result<Linearization> {
    let (f_mat, u_vec) = linearize_dynamics(model, l, x_fe)?;
    let (h_t, v_vec) = linearize_measurement(model, l, x_fp)?;
    Ok(Linearization {
        f_mat,
        u_vec,
        h_t,
        v_vec,
    })
}
