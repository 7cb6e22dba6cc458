//! Exact Gaussian algebra: the sum-product computational rules on Gaussian
//! messages (product at equality nodes, affine propagation through function
//! nodes, overlap constants), marginalization, mixture moment matching and
//! sampling. Every message computed by the filters is built from these.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{
    check_symmetric, psd_project, psd_sqrt, sym_inverse, sym_inverse_logdet, symmetrize,
};

/// Multivariate Gaussian in mean/covariance form. The covariance is kept
/// symmetric and positive semidefinite by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMoment {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
}

/// Multivariate Gaussian in canonical (information) form: precision
/// `W = C^-1` and transformed mean `w = W eta`. A zero precision represents
/// the flat (unity) message, so products need no special-casing.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianCanonical {
    precision: DMatrix<f64>,
    shift: DVector<f64>,
}

/// One term of a joint particle/Gaussian mixture: a point value for the
/// nonlinear substate paired with a Gaussian over the linear substate.
#[derive(Debug, Clone)]
pub struct WeightedGaussianPair {
    pub point: DVector<f64>,
    pub gaussian: GaussianMoment,
    pub weight: f64,
}

impl GaussianMoment {
    /// Validates symmetry and positive semidefiniteness of `cov`; eigenvalues
    /// within the tolerated negative floor are clamped to zero.
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        if cov.nrows() != mean.len() {
            return Err(Error::DimensionMismatch {
                context: "GaussianMoment::new",
                expected: mean.len(),
                got: cov.nrows(),
            });
        }
        check_symmetric(&cov, "GaussianMoment::new")?;
        let cov = symmetrize(&cov);
        // Cheap accept path: a successful Cholesky proves PD.
        let cov = if cov.clone().cholesky().is_some() {
            cov
        } else {
            psd_project(&cov, "GaussianMoment::new")?
        };
        Ok(Self { mean, cov })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    /// Converts to canonical form; requires an invertible covariance.
    pub fn to_canonical(&self) -> Result<GaussianCanonical> {
        let precision = sym_inverse(&self.cov, "moment to canonical")?;
        let shift = &precision * &self.mean;
        Ok(GaussianCanonical { precision, shift })
    }

    /// Log-density at `x`; requires an invertible covariance.
    pub fn log_density(&self, x: &DVector<f64>) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                context: "log_density",
                expected: self.dim(),
                got: x.len(),
            });
        }
        let (w, logdet) = sym_inverse_logdet(&self.cov, "log_density")?;
        let d = x - &self.mean;
        let n = self.dim() as f64;
        Ok(-0.5 * (n * (2.0 * std::f64::consts::PI).ln() + logdet + d.dot(&(&w * &d))))
    }

    /// Draws one sample. Rank-deficient covariances are allowed through a PSD
    /// factorization with eigenvalue clamping; a zero covariance returns the
    /// mean exactly.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<DVector<f64>> {
        let factor = psd_sqrt(&self.cov, "GaussianMoment::sample")?;
        let z = DVector::from_fn(self.dim(), |_, _| rng.sample(StandardNormal));
        Ok(&self.mean + factor * z)
    }
}

impl GaussianCanonical {
    /// Validates symmetry and positive semidefiniteness of the precision.
    /// Singular precisions are allowed: `W = 0` is the flat/unity message.
    pub fn new(precision: DMatrix<f64>, shift: DVector<f64>) -> Result<Self> {
        if precision.nrows() != shift.len() {
            return Err(Error::DimensionMismatch {
                context: "GaussianCanonical::new",
                expected: shift.len(),
                got: precision.nrows(),
            });
        }
        check_symmetric(&precision, "GaussianCanonical::new")?;
        let precision = psd_project(&symmetrize(&precision), "GaussianCanonical::new")?;
        Ok(Self { precision, shift })
    }

    /// The flat (unity) message of dimension `n`: `W = 0`, `w = 0`.
    pub fn flat(n: usize) -> Self {
        Self {
            precision: DMatrix::zeros(n, n),
            shift: DVector::zeros(n),
        }
    }

    pub fn dim(&self) -> usize {
        self.shift.len()
    }

    pub fn precision(&self) -> &DMatrix<f64> {
        &self.precision
    }

    pub fn shift(&self) -> &DVector<f64> {
        &self.shift
    }

    pub fn is_flat(&self) -> bool {
        self.precision.iter().all(|&v| v == 0.0) && self.shift.iter().all(|&v| v == 0.0)
    }

    /// Converts to moment form; requires an invertible precision.
    pub fn to_moment(&self) -> Result<GaussianMoment> {
        let cov = sym_inverse(&self.precision, "canonical to moment")?;
        let mean = &cov * &self.shift;
        GaussianMoment::new(mean, cov)
    }
}

/// Gaussian product at an equality node: precisions and transformed means add.
pub fn product(a: &GaussianCanonical, b: &GaussianCanonical) -> Result<GaussianCanonical> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            context: "product",
            expected: a.dim(),
            got: b.dim(),
        });
    }
    Ok(GaussianCanonical {
        precision: symmetrize(&(&a.precision + &b.precision)),
        shift: &a.shift + &b.shift,
    })
}

/// Propagation of a Gaussian through an affine-Gaussian function node
/// `x2 = A x1 + b + noise(C)`: mean `A eta + b`, covariance `C + A C1 A^T`.
pub fn affine_propagate(
    g: &GaussianMoment,
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    c: &DMatrix<f64>,
) -> Result<GaussianMoment> {
    let (m, n) = (a.nrows(), a.ncols());
    if n != g.dim() {
        return Err(Error::DimensionMismatch {
            context: "affine_propagate input",
            expected: g.dim(),
            got: n,
        });
    }
    if b.len() != m || c.nrows() != m || c.ncols() != m {
        return Err(Error::DimensionMismatch {
            context: "affine_propagate output",
            expected: m,
            got: if b.len() != m { b.len() } else { c.nrows() },
        });
    }
    let mean = a * &g.mean + b;
    let cov = symmetrize(&(c + a * &g.cov * a.transpose()));
    GaussianMoment::new(mean, cov)
}

/// Log of the constant message emitted when a Gaussian message meets a
/// Gaussian function node. The exponent is evaluated in the numerically
/// stable difference form `-(eta1-eta2)^T (C1+C2)^-1 (eta1-eta2) / 2`, which
/// is algebraically identical to the canonical-form expression
/// `(eta^T W eta - eta1^T W1 eta1 - eta2^T W2 eta2) / 2`. With
/// `include_det`, the scale `D = det(C1+C2)^(-N/2)` is added in log form.
pub fn log_overlap_weight(
    a: &GaussianMoment,
    b: &GaussianMoment,
    include_det: bool,
) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            context: "overlap_weight",
            expected: a.dim(),
            got: b.dim(),
        });
    }
    let sum = symmetrize(&(&a.cov + &b.cov));
    let (w, logdet) = sym_inverse_logdet(&sum, "overlap_weight")?;
    let d = &a.mean - &b.mean;
    let mut log_w = -0.5 * d.dot(&(&w * &d));
    if include_det {
        log_w -= 0.5 * a.dim() as f64 * logdet;
    }
    Ok(log_w)
}

/// The overlap constant itself, including the determinant scale; underflow
/// returns 0.
pub fn overlap_weight(a: &GaussianMoment, b: &GaussianMoment) -> Result<f64> {
    Ok(log_overlap_weight(a, b, true)?.exp())
}

/// Marginal over a contiguous index range: sub-vector of the mean and
/// principal sub-block of the covariance.
pub fn marginal_block(g: &GaussianMoment, range: std::ops::Range<usize>) -> Result<GaussianMoment> {
    if range.end > g.dim() || range.start > range.end {
        return Err(Error::IndexOutOfRange {
            index: range.end,
            dim: g.dim(),
        });
    }
    let n = range.end - range.start;
    let mean = g.mean.rows(range.start, n).into_owned();
    let cov = g.cov.view((range.start, range.start), (n, n)).into_owned();
    GaussianMoment::new(mean, cov)
}

/// Moment matching of the mixture `sum_j w_j N(xL; eta_j, C_j) delta(xN - x_j)`
/// onto a single Gaussian over the stacked `(xL, xN)` vector, preserving the
/// exact first two moments.
pub fn moment_match(pairs: &[WeightedGaussianPair]) -> Result<GaussianMoment> {
    moment_match_refs(pairs.iter().map(|p| (&p.point, &p.gaussian, p.weight)))
}

/// Allocation-light core of [`moment_match`] over borrowed components.
pub(crate) fn moment_match_refs<'a, I>(pairs: I) -> Result<GaussianMoment>
where
    I: Iterator<Item = (&'a DVector<f64>, &'a GaussianMoment, f64)>,
{
    let mut total = 0.0;
    let mut count = 0usize;
    let mut eta_l = DVector::zeros(0);
    let mut eta_n = DVector::zeros(0);
    let mut r_ll = DMatrix::zeros(0, 0);
    let mut r_nn = DMatrix::zeros(0, 0);
    let mut r_ln = DMatrix::zeros(0, 0);
    let (mut d_l, mut d_n) = (0usize, 0usize);
    for (point, gaussian, weight) in pairs {
        if count == 0 {
            d_l = gaussian.dim();
            d_n = point.len();
            eta_l = DVector::zeros(d_l);
            eta_n = DVector::zeros(d_n);
            r_ll = DMatrix::zeros(d_l, d_l);
            r_nn = DMatrix::zeros(d_n, d_n);
            r_ln = DMatrix::zeros(d_l, d_n);
        }
        if gaussian.dim() != d_l || point.len() != d_n {
            return Err(Error::DimensionMismatch {
                context: "moment_match",
                expected: d_l + d_n,
                got: gaussian.dim() + point.len(),
            });
        }
        if weight < 0.0 || !weight.is_finite() {
            return Err(Error::InvalidParams(format!(
                "moment_match weight {weight} is not a finite nonnegative value"
            )));
        }
        let m = gaussian.mean();
        eta_l.axpy(weight, m, 1.0);
        eta_n.axpy(weight, point, 1.0);
        r_ll.ger(weight, m, m, 1.0);
        r_ll.zip_apply(gaussian.cov(), |acc, c| *acc += weight * c);
        r_nn.ger(weight, point, point, 1.0);
        r_ln.ger(weight, m, point, 1.0);
        total += weight;
        count += 1;
    }
    if count == 0 {
        return Err(Error::EmptyInput("moment_match"));
    }
    if total <= 0.0 {
        return Err(Error::ZeroTotalWeight);
    }
    eta_l /= total;
    eta_n /= total;
    r_ll /= total;
    r_nn /= total;
    r_ln /= total;
    let mut c_ll = r_ll;
    c_ll.ger(-1.0, &eta_l, &eta_l, 1.0);
    let mut c_nn = r_nn;
    c_nn.ger(-1.0, &eta_n, &eta_n, 1.0);
    let mut c_ln = r_ln;
    c_ln.ger(-1.0, &eta_l, &eta_n, 1.0);

    let d = d_l + d_n;
    let mut mean = DVector::zeros(d);
    mean.rows_mut(0, d_l).copy_from(&eta_l);
    mean.rows_mut(d_l, d_n).copy_from(&eta_n);
    let mut cov = DMatrix::zeros(d, d);
    cov.view_mut((0, 0), (d_l, d_l)).copy_from(&c_ll);
    cov.view_mut((d_l, d_l), (d_n, d_n)).copy_from(&c_nn);
    cov.view_mut((0, d_l), (d_l, d_n)).copy_from(&c_ln);
    cov.view_mut((d_l, 0), (d_n, d_l)).copy_from(&c_ln.transpose());
    // Scatter cancellation can leave eigenvalues a hair below zero; the
    // constructor clamps anything within the tolerated floor.
    GaussianMoment::new(mean, symmetrize(&cov))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::rngs::StdRng;
    use rand::SeedableRng;

    fn g1(mean: f64, var: f64) -> GaussianMoment {
        GaussianMoment::new(DVector::from_vec(vec![mean]), DMatrix::from_element(1, 1, var))
            .unwrap()
    }

    #[test]
    fn convert_scalar() {
        let g = g1(1.0, 2.0);
        let c = g.to_canonical().unwrap();
        assert_relative_eq!(c.precision()[(0, 0)], 0.5);
        assert_relative_eq!(c.shift()[0], 0.5);
    }

    #[test]
    fn convert_identity() {
        let g = GaussianMoment::new(DVector::zeros(3), DMatrix::identity(3, 3)).unwrap();
        let c = g.to_canonical().unwrap();
        assert_eq!(c.precision(), &DMatrix::identity(3, 3));
        assert_eq!(c.shift(), &DVector::zeros(3));
    }

    #[test]
    fn convert_rejects_rank_one_covariance() {
        let g = GaussianMoment::new(
            DVector::zeros(2),
            DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]),
        )
        .unwrap();
        assert!(matches!(
            g.to_canonical(),
            Err(Error::SingularMatrix { .. })
        ));
    }

    #[test]
    fn product_scalar_precisions_add() {
        let a = g1(0.0, 1.0).to_canonical().unwrap();
        let p = product(&a, &a).unwrap();
        assert_relative_eq!(p.precision()[(0, 0)], 2.0);
        assert_relative_eq!(p.shift()[0], 0.0);
        let m = p.to_moment().unwrap();
        assert_relative_eq!(m.cov()[(0, 0)], 0.5);
    }

    #[test]
    fn product_with_flat_is_identity() {
        let a = g1(1.5, 0.7).to_canonical().unwrap();
        let p = product(&a, &GaussianCanonical::flat(1)).unwrap();
        assert_eq!(p.precision(), a.precision());
        assert_eq!(p.shift(), a.shift());
    }

    /// CR1 against a pointwise grid-multiply oracle: the product density must
    /// be proportional to the pointwise product of the factor densities, so
    /// their ratio is constant over the grid.
    #[test]
    fn product_matches_grid_multiply_oracle() {
        let a = GaussianMoment::new(DVector::from_vec(vec![1.0, 0.0]), DMatrix::identity(2, 2))
            .unwrap();
        let b = GaussianMoment::new(
            DVector::from_vec(vec![0.0, 1.0]),
            DMatrix::identity(2, 2) * 2.0,
        )
        .unwrap();
        let c = product(&a.to_canonical().unwrap(), &b.to_canonical().unwrap())
            .unwrap()
            .to_moment()
            .unwrap();
        let mut ratios = Vec::new();
        for i in 0..41 {
            for j in 0..41 {
                let x = DVector::from_vec(vec![
                    -4.0 + 8.0 * i as f64 / 40.0,
                    -4.0 + 8.0 * j as f64 / 40.0,
                ]);
                let log_prod = a.log_density(&x).unwrap() + b.log_density(&x).unwrap();
                ratios.push(log_prod - c.log_density(&x).unwrap());
            }
        }
        let max = ratios.iter().cloned().fold(f64::MIN, f64::max);
        let min = ratios.iter().cloned().fold(f64::MAX, f64::min);
        assert!(max - min < 1e-10, "log ratio spread {}", max - min);
    }

    #[test]
    fn affine_identity() {
        let g = GaussianMoment::new(
            DVector::from_vec(vec![1.0, -2.0]),
            DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0]),
        )
        .unwrap();
        let out = affine_propagate(
            &g,
            &DMatrix::identity(2, 2),
            &DVector::zeros(2),
            &DMatrix::zeros(2, 2),
        )
        .unwrap();
        assert_relative_eq!(out.mean(), g.mean());
        assert_relative_eq!(out.cov(), g.cov(), epsilon = 1e-15);
    }

    /// CR2 against a Monte Carlo propagation oracle (1e6 samples, 3 standard
    /// errors), plus the closed-form values.
    #[test]
    fn affine_scalar_matches_monte_carlo() {
        let g = g1(1.0, 2.0);
        let out = affine_propagate(
            &g,
            &DMatrix::from_element(1, 1, 3.0),
            &DVector::from_vec(vec![1.0]),
            &DMatrix::from_element(1, 1, 4.0),
        )
        .unwrap();
        assert_relative_eq!(out.mean()[0], 4.0, epsilon = 1e-12);
        assert_relative_eq!(out.cov()[(0, 0)], 22.0, epsilon = 1e-12);

        let mut rng = StdRng::seed_from_u64(7);
        let n = 1_000_000usize;
        let (mut s1, mut s2) = (0.0, 0.0);
        for _ in 0..n {
            let x = g.sample(&mut rng).unwrap()[0];
            let noise: f64 = rng.sample::<f64, _>(StandardNormal) * 2.0;
            let y = 3.0 * x + 1.0 + noise;
            s1 += y;
            s2 += y * y;
        }
        let mean = s1 / n as f64;
        let var = s2 / n as f64 - mean * mean;
        let se_mean = (22.0f64 / n as f64).sqrt();
        let se_var = 22.0 * (2.0 / n as f64).sqrt();
        assert!((mean - 4.0).abs() < 3.0 * se_mean, "mean {mean}");
        assert!((var - 22.0).abs() < 3.0 * se_var, "var {var}");
    }

    #[test]
    fn affine_selector_equals_marginal() {
        let g = GaussianMoment::new(
            DVector::from_vec(vec![1.0, 2.0, 3.0]),
            DMatrix::from_row_slice(3, 3, &[2.0, 0.5, 0.1, 0.5, 1.5, 0.2, 0.1, 0.2, 1.0]),
        )
        .unwrap();
        let mut sel = DMatrix::zeros(2, 3);
        sel[(0, 0)] = 1.0;
        sel[(1, 1)] = 1.0;
        let via_affine =
            affine_propagate(&g, &sel, &DVector::zeros(2), &DMatrix::zeros(2, 2)).unwrap();
        let via_marginal = marginal_block(&g, 0..2).unwrap();
        assert_relative_eq!(via_affine.mean(), via_marginal.mean());
        assert_relative_eq!(via_affine.cov(), via_marginal.cov(), epsilon = 1e-15);
    }

    /// CR3 against a numerical grid integral of the pdf product multiplied by
    /// (2 pi)^(1/2); the frozen closed form is 2^(-1/2).
    #[test]
    fn overlap_scalar_matches_grid_integral() {
        let a = g1(0.0, 1.0);
        let b = g1(0.0, 1.0);
        let w = overlap_weight(&a, &b).unwrap();
        assert_relative_eq!(w, 0.5f64.sqrt(), epsilon = 1e-12);

        let h = 1e-3;
        let mut integral = 0.0;
        let mut x = -10.0;
        while x < 10.0 {
            let xv = DVector::from_vec(vec![x]);
            integral +=
                h * (a.log_density(&xv).unwrap() + b.log_density(&xv).unwrap()).exp();
            x += h;
        }
        let oracle = integral * (2.0 * std::f64::consts::PI).sqrt();
        assert_relative_eq!(w, oracle, max_relative = 1e-6);
    }

    #[test]
    fn overlap_symmetric() {
        let mut rng = StdRng::seed_from_u64(3);
        for _ in 0..20 {
            let m = DMatrix::from_fn(3, 3, |_, _| rng.random::<f64>() - 0.5);
            let c1 = &m * m.transpose() + DMatrix::identity(3, 3) * 0.5;
            let m2 = DMatrix::from_fn(3, 3, |_, _| rng.random::<f64>() - 0.5);
            let c2 = &m2 * m2.transpose() + DMatrix::identity(3, 3) * 0.5;
            let a = GaussianMoment::new(
                DVector::from_fn(3, |_, _| rng.random::<f64>() * 2.0 - 1.0),
                c1,
            )
            .unwrap();
            let b = GaussianMoment::new(
                DVector::from_fn(3, |_, _| rng.random::<f64>() * 2.0 - 1.0),
                c2,
            )
            .unwrap();
            assert_relative_eq!(
                overlap_weight(&a, &b).unwrap(),
                overlap_weight(&b, &a).unwrap(),
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn overlap_underflows_to_zero() {
        let a = g1(0.0, 1.0);
        let b = g1(100.0, 1.0);
        assert_eq!(overlap_weight(&a, &b).unwrap(), 0.0);
    }

    #[test]
    fn marginal_full_range_is_identity() {
        let g = GaussianMoment::new(
            DVector::from_vec(vec![1.0, 2.0]),
            DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.2, 2.0]),
        )
        .unwrap();
        let m = marginal_block(&g, 0..2).unwrap();
        assert_eq!(m.mean(), g.mean());
        assert_eq!(m.cov(), g.cov());
    }

    #[test]
    fn marginal_diagonal_case() {
        let g = GaussianMoment::new(
            DVector::from_vec(vec![1.0, 2.0, 3.0]),
            DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 5.0, 6.0])),
        )
        .unwrap();
        let m = marginal_block(&g, 0..2).unwrap();
        assert_eq!(m.mean().as_slice(), &[1.0, 2.0]);
        assert_eq!(
            m.cov(),
            &DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 5.0]))
        );
        assert!(matches!(
            marginal_block(&g, 1..4),
            Err(Error::IndexOutOfRange { .. })
        ));
    }

    /// Marginalization against a grid-integration oracle: integrating the
    /// joint density over the last two coordinates reproduces the marginal
    /// density of the first two.
    #[test]
    fn marginal_matches_grid_integration() {
        let cov = DMatrix::from_row_slice(
            4,
            4,
            &[
                2.0, 0.4, 0.3, 0.1, //
                0.4, 1.5, 0.2, 0.3, //
                0.3, 0.2, 1.2, 0.4, //
                0.1, 0.3, 0.4, 1.8,
            ],
        );
        let g = GaussianMoment::new(DVector::from_vec(vec![0.5, -0.3, 0.2, 0.1]), cov).unwrap();
        let m = marginal_block(&g, 0..2).unwrap();

        let steps = 129usize;
        let lo = -12.0;
        let hi = 12.0;
        let h = (hi - lo) / (steps - 1) as f64;
        for probe in [[0.0, 0.0], [1.0, -0.5], [-0.8, 0.6]] {
            let mut integral = 0.0;
            for i in 0..steps {
                for j in 0..steps {
                    let x = DVector::from_vec(vec![
                        probe[0],
                        probe[1],
                        lo + h * i as f64,
                        lo + h * j as f64,
                    ]);
                    integral += h * h * g.log_density(&x).unwrap().exp();
                }
            }
            let direct = m
                .log_density(&DVector::from_vec(vec![probe[0], probe[1]]))
                .unwrap()
                .exp();
            assert_relative_eq!(integral, direct, max_relative = 1e-6);
        }
    }

    #[test]
    fn moment_match_single_pair() {
        let pair = WeightedGaussianPair {
            point: DVector::from_vec(vec![2.0]),
            gaussian: g1(1.0, 0.5),
            weight: 1.0,
        };
        let out = moment_match(&[pair]).unwrap();
        assert_eq!(out.mean().as_slice(), &[1.0, 2.0]);
        assert_relative_eq!(out.cov()[(0, 0)], 0.5);
        assert_eq!(out.cov()[(1, 1)], 0.0);
        assert_eq!(out.cov()[(0, 1)], 0.0);
    }

    #[test]
    fn moment_match_two_deltas() {
        let mk = |p: f64| WeightedGaussianPair {
            point: DVector::from_vec(vec![p]),
            gaussian: GaussianMoment::new(DVector::zeros(1), DMatrix::zeros(1, 1)).unwrap(),
            weight: 1.0,
        };
        let out = moment_match(&[mk(1.0), mk(-1.0)]).unwrap();
        assert_relative_eq!(out.mean()[1], 0.0);
        assert_relative_eq!(out.cov()[(1, 1)], 1.0);
    }

    #[test]
    fn moment_match_rejects_bad_input() {
        assert!(matches!(moment_match(&[]), Err(Error::EmptyInput(_))));
        let pair = WeightedGaussianPair {
            point: DVector::from_vec(vec![2.0]),
            gaussian: g1(1.0, 0.5),
            weight: 0.0,
        };
        assert!(matches!(
            moment_match(&[pair]),
            Err(Error::ZeroTotalWeight)
        ));
    }

    /// Moment matching against a 1e6-draw sampling oracle on three random
    /// pairs (3 standard errors on every moment entry).
    #[test]
    fn moment_match_matches_sampling_oracle() {
        let mut rng = StdRng::seed_from_u64(11);
        let mut pairs = Vec::new();
        for _ in 0..3 {
            let m = DMatrix::from_fn(2, 2, |_, _| rng.random::<f64>() - 0.5);
            let cov = &m * m.transpose() + DMatrix::identity(2, 2) * 0.3;
            pairs.push(WeightedGaussianPair {
                point: DVector::from_fn(1, |_, _| rng.random::<f64>() * 2.0 - 1.0),
                gaussian: GaussianMoment::new(
                    DVector::from_fn(2, |_, _| rng.random::<f64>() * 2.0 - 1.0),
                    cov,
                )
                .unwrap(),
                weight: rng.random::<f64>() + 0.1,
            });
        }
        let out = moment_match(&pairs).unwrap();

        let total: f64 = pairs.iter().map(|p| p.weight).sum();
        let n = 1_000_000usize;
        let mut sum = DVector::zeros(3);
        let mut sq = DMatrix::zeros(3, 3);
        for _ in 0..n {
            let u = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = 0;
            for (i, p) in pairs.iter().enumerate() {
                acc += p.weight;
                if u <= acc {
                    pick = i;
                    break;
                }
            }
            let xl = pairs[pick].gaussian.sample(&mut rng).unwrap();
            let x = DVector::from_vec(vec![xl[0], xl[1], pairs[pick].point[0]]);
            sum += &x;
            sq += &x * x.transpose();
        }
        let mean = sum / n as f64;
        let cov = sq / n as f64 - &mean * mean.transpose();
        for i in 0..3 {
            let se = (out.cov()[(i, i)] / n as f64).sqrt();
            assert!(
                (mean[i] - out.mean()[i]).abs() < 3.0 * se,
                "mean component {i}"
            );
            for j in 0..3 {
                // Conservative standard error for a covariance entry.
                let se_c = ((out.cov()[(i, i)] * out.cov()[(j, j)]
                    + out.cov()[(i, j)].powi(2))
                    / n as f64)
                    .sqrt();
                assert!(
                    (cov[(i, j)] - out.cov()[(i, j)]).abs() < 3.0 * se_c,
                    "cov entry ({i},{j})"
                );
            }
        }
    }

    #[test]
    fn sample_zero_covariance_returns_mean() {
        let g = GaussianMoment::new(DVector::from_vec(vec![3.0, -1.0]), DMatrix::zeros(2, 2))
            .unwrap();
        let mut rng = StdRng::seed_from_u64(0);
        assert_eq!(g.sample(&mut rng).unwrap().as_slice(), &[3.0, -1.0]);
    }

    #[test]
    fn sample_statistics_standard_normal() {
        let g = GaussianMoment::new(DVector::zeros(2), DMatrix::identity(2, 2)).unwrap();
        let mut rng = StdRng::seed_from_u64(5);
        let n = 100_000usize;
        let mut sum = DVector::zeros(2);
        let mut sq = DMatrix::zeros(2, 2);
        for _ in 0..n {
            let x = g.sample(&mut rng).unwrap();
            sum += &x;
            sq += &x * x.transpose();
        }
        let mean = sum / n as f64;
        let cov = sq / n as f64 - &mean * mean.transpose();
        for i in 0..2 {
            assert!(mean[i].abs() < 0.02, "mean {}", mean[i]);
            for j in 0..2 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((cov[(i, j)] - expect).abs() < 0.02);
            }
        }
    }

    #[test]
    fn sample_deterministic_under_fixed_seed() {
        let g = GaussianMoment::new(
            DVector::from_vec(vec![1.0, 2.0]),
            DMatrix::from_row_slice(2, 2, &[1.0, 0.4, 0.4, 2.0]),
        )
        .unwrap();
        let draw = |seed: u64| {
            let mut rng = StdRng::seed_from_u64(seed);
            (0..10)
                .map(|_| g.sample(&mut rng).unwrap())
                .collect::<Vec<_>>()
        };
        assert_eq!(draw(42), draw(42));
    }
}

#[cfg(test)]
mod properties {
    use super::*;
    use crate::linalg::max_abs;
    use proptest::prelude::*;

    fn spd_and_mean(dim: usize) -> impl Strategy<Value = (DVector<f64>, DMatrix<f64>)> {
        (
            proptest::collection::vec(-2.0_f64..2.0, dim),
            proptest::collection::vec(-1.0_f64..1.0, dim * dim),
            0.3_f64..1.5,
        )
            .prop_map(move |(mean, m, ridge)| {
                let m = DMatrix::from_vec(dim, dim, m);
                let cov = &m * m.transpose() + DMatrix::identity(dim, dim) * ridge;
                (DVector::from_vec(mean), cov)
            })
    }

    fn rel(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
        let scale = max_abs(a).max(max_abs(b)).max(1e-300);
        max_abs(&(a - b)) / scale
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn product_commutative_associative(
            (m1, c1) in spd_and_mean(3),
            (m2, c2) in spd_and_mean(3),
            (m3, c3) in spd_and_mean(3),
        ) {
            let a = GaussianMoment::new(m1, c1).unwrap().to_canonical().unwrap();
            let b = GaussianMoment::new(m2, c2).unwrap().to_canonical().unwrap();
            let c = GaussianMoment::new(m3, c3).unwrap().to_canonical().unwrap();
            let ab = product(&a, &b).unwrap();
            let ba = product(&b, &a).unwrap();
            prop_assert!(rel(ab.precision(), ba.precision()) < 1e-10);
            let ab_c = product(&ab, &c).unwrap();
            let a_bc = product(&a, &product(&b, &c).unwrap()).unwrap();
            prop_assert!(rel(ab_c.precision(), a_bc.precision()) < 1e-10);
            prop_assert!(
                (ab_c.shift() - a_bc.shift()).amax()
                    <= 1e-10 * ab_c.shift().amax().max(1.0)
            );
        }

        #[test]
        fn convert_round_trip((mean, cov) in spd_and_mean(4)) {
            let g = GaussianMoment::new(mean, cov).unwrap();
            let back = g.to_canonical().unwrap().to_moment().unwrap();
            prop_assert!(rel(back.cov(), g.cov()) < 1e-10);
            prop_assert!((back.mean() - g.mean()).amax() <= 1e-10 * g.mean().amax().max(1.0));
        }

        #[test]
        fn affine_mean_is_affine((m1, c1) in spd_and_mean(3), shift in -3.0_f64..3.0) {
            let g = GaussianMoment::new(m1.clone(), c1.clone()).unwrap();
            let shifted = GaussianMoment::new(m1.add_scalar(shift), c1).unwrap();
            let a = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, -1.0, 0.5, 0.0, 1.0]);
            let b = DVector::from_vec(vec![0.3, -0.7]);
            let c = DMatrix::identity(2, 2) * 0.2;
            let o1 = affine_propagate(&g, &a, &b, &c).unwrap();
            let o2 = affine_propagate(&shifted, &a, &b, &c).unwrap();
            let expected = o1.mean() + &a * DVector::from_element(3, shift);
            prop_assert!((o2.mean() - expected).amax() < 1e-10);
            prop_assert!(rel(o1.cov(), o2.cov()) < 1e-12);
        }

        #[test]
        fn flat_product_identity((m1, c1) in spd_and_mean(2)) {
            let a = GaussianMoment::new(m1, c1).unwrap().to_canonical().unwrap();
            let p = product(&a, &GaussianCanonical::flat(2)).unwrap();
            prop_assert_eq!(p.precision(), a.precision());
            prop_assert_eq!(p.shift(), a.shift());
        }
    }
}
