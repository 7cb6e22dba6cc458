//! Small dense matrix helpers shared by the Gaussian algebra and the filters.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

/// Condition-number threshold above which an inverse is treated as singular.
pub const COND_LIMIT: f64 = 1e14;

/// Relative tolerance for symmetry checks.
pub const SYM_TOL: f64 = 1e-12;

/// Relative floor (scaled by the trace) below which eigenvalues of a nominally
/// PSD matrix are rejected; values in `[-PSD_TOL*trace, 0)` are clamped to 0.
pub const PSD_TOL: f64 = 1e-10;

/// Returns `(m + m^T) / 2`.
pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

pub(crate) fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |a, &v| a.max(v.abs()))
}

/// Checks that `m` is square and symmetric to within `SYM_TOL` relative.
pub fn check_symmetric(m: &DMatrix<f64>, context: &'static str) -> Result<()> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch {
            context,
            expected: m.nrows(),
            got: m.ncols(),
        });
    }
    let scale = max_abs(m);
    let asym = max_abs(&(m - m.transpose()));
    if asym > SYM_TOL * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::NotPsd {
            context,
            min_eig: f64::NAN,
        });
    }
    Ok(())
}

/// Eigendecomposition of a symmetric matrix, eigenvalues ascending.
fn sym_eigen(m: &DMatrix<f64>) -> (DMatrix<f64>, DVector<f64>) {
    let eig = m.clone().symmetric_eigen();
    (eig.eigenvectors, eig.eigenvalues)
}

/// Inverse of a symmetric matrix with a condition-number guard.
pub fn sym_inverse(m: &DMatrix<f64>, context: &'static str) -> Result<DMatrix<f64>> {
    Ok(sym_inverse_logdet(m, context)?.0)
}

/// Inverse of a symmetric matrix together with `ln |det|`.
pub fn sym_inverse_logdet(m: &DMatrix<f64>, context: &'static str) -> Result<(DMatrix<f64>, f64)> {
    let (q, vals) = sym_eigen(m);
    let max = vals.iter().fold(0.0_f64, |a, &v| a.max(v.abs()));
    let min = vals.iter().fold(f64::INFINITY, |a, &v| a.min(v.abs()));
    if min == 0.0 || max / min > COND_LIMIT {
        return Err(Error::SingularMatrix {
            context,
            cond: if min == 0.0 { f64::INFINITY } else { max / min },
        });
    }
    let mut inv = DMatrix::zeros(m.nrows(), m.ncols());
    for j in 0..vals.len() {
        let col = q.column(j);
        inv += col * col.transpose() / vals[j];
    }
    let logdet = vals.iter().map(|v| v.abs().ln()).sum();
    Ok((symmetrize(&inv), logdet))
}

/// General (non-symmetric) inverse via LU.
pub fn inverse(m: &DMatrix<f64>, context: &'static str) -> Result<DMatrix<f64>> {
    m.clone().try_inverse().ok_or(Error::SingularMatrix {
        context,
        cond: f64::INFINITY,
    })
}

/// Cholesky factorization of an SPD matrix with a singularity guard: fails
/// on factorization breakdown or when the squared diagonal ratio of the
/// factor (a cheap condition-number proxy) exceeds `COND_LIMIT`. This is the
/// workhorse of the per-particle message loops.
pub fn spd_factor(m: &DMatrix<f64>, context: &'static str) -> Result<Cholesky<f64, Dyn>> {
    let chol = m.clone().cholesky().ok_or(Error::SingularMatrix {
        context,
        cond: f64::INFINITY,
    })?;
    let diag = chol.l_dirty().diagonal();
    let max = diag.iter().cloned().fold(0.0_f64, f64::max);
    let min = diag.iter().cloned().fold(f64::INFINITY, f64::min);
    let cond = (max / min).powi(2);
    if !(cond <= COND_LIMIT) {
        return Err(Error::SingularMatrix { context, cond });
    }
    Ok(chol)
}

/// `ln det` of a factored SPD matrix.
pub fn spd_logdet(chol: &Cholesky<f64, Dyn>) -> f64 {
    2.0 * chol
        .l_dirty()
        .diagonal()
        .iter()
        .map(|v| v.ln())
        .sum::<f64>()
}

/// Verifies that a symmetric matrix is PSD to within the tolerated floor and
/// returns a copy with eigenvalues in `[-PSD_TOL*trace, 0)` clamped to zero.
pub fn psd_project(m: &DMatrix<f64>, context: &'static str) -> Result<DMatrix<f64>> {
    let (q, vals) = sym_eigen(m);
    let floor = -PSD_TOL * m.trace().abs().max(f64::MIN_POSITIVE);
    let mut clamped = false;
    let mut fixed = vals.clone();
    for v in fixed.iter_mut() {
        if *v < floor {
            return Err(Error::NotPsd {
                context,
                min_eig: *v,
            });
        }
        if *v < 0.0 {
            *v = 0.0;
            clamped = true;
        }
    }
    if !clamped {
        return Ok(m.clone());
    }
    let mut out = DMatrix::zeros(m.nrows(), m.ncols());
    for j in 0..fixed.len() {
        let col = q.column(j);
        out += col * col.transpose() * fixed[j];
    }
    Ok(symmetrize(&out))
}

/// Factor `S` with `S S^T = m` for a PSD matrix, rank deficiency allowed:
/// the Cholesky factor when `m` is positive definite, otherwise an
/// eigenvalue factorization with eigenvalues in the tolerated negative floor
/// clamped to 0.
pub fn psd_sqrt(m: &DMatrix<f64>, context: &'static str) -> Result<DMatrix<f64>> {
    if let Some(chol) = m.clone().cholesky() {
        return Ok(chol.unpack());
    }
    let (q, vals) = sym_eigen(m);
    let floor = -PSD_TOL * m.trace().abs().max(f64::MIN_POSITIVE);
    let mut s = q;
    for j in 0..vals.len() {
        let v = vals[j];
        if v < floor {
            return Err(Error::NotPsd {
                context,
                min_eig: v,
            });
        }
        let root = v.max(0.0).sqrt();
        s.column_mut(j).scale_mut(root);
    }
    Ok(s)
}

/// Raises eigenvalues of a symmetric matrix that fall below `floor` up to
/// `floor`, leaving the rest untouched.
pub fn floor_eigenvalues(m: &DMatrix<f64>, floor: f64) -> DMatrix<f64> {
    let (q, vals) = sym_eigen(m);
    if vals.iter().all(|&v| v >= floor) {
        return m.clone();
    }
    let mut out = DMatrix::zeros(m.nrows(), m.ncols());
    for j in 0..vals.len() {
        let col = q.column(j);
        out += col * col.transpose() * vals[j].max(floor);
    }
    symmetrize(&out)
}

/// Block-diagonal assembly of two square matrices.
pub fn block_diag2(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let (na, nb) = (a.nrows(), b.nrows());
    let mut out = DMatrix::zeros(na + nb, na + nb);
    out.view_mut((0, 0), (na, na)).copy_from(a);
    out.view_mut((na, na), (nb, nb)).copy_from(b);
    out
}
