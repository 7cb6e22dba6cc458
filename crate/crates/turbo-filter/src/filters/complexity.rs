//! Dominant-term operation counts for one recursion of turbo filtering and of
//! marginalized particle filtering, as functions of the model dimensions, the
//! particle count and the iteration count. Slot-evaluation costs are not
//! included.

use crate::error::{Error, Result};

/// Dimensions entering the complexity estimates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ComplexityInputs {
    pub d: usize,
    pub d_l: usize,
    pub d_n: usize,
    pub p: usize,
    pub n_p: usize,
    pub n_it: usize,
}

impl ComplexityInputs {
    pub fn new(
        d: usize,
        d_l: usize,
        d_n: usize,
        p: usize,
        n_p: usize,
        n_it: usize,
    ) -> Result<Self> {
        if d_l == 0 || d_n == 0 || p == 0 || n_it == 0 {
            return Err(Error::InvalidParams(
                "complexity dimensions and iteration count must be positive".to_string(),
            ));
        }
        if d != d_l + d_n {
            return Err(Error::InvalidParams(format!(
                "d={d} must equal d_l+d_n={}",
                d_l + d_n
            )));
        }
        Ok(Self {
            d,
            d_l,
            d_n,
            p,
            n_p,
            n_it,
        })
    }
}

/// Returns `(n_tf, n_mpf)`, the dominant operation counts of the turbo filter
/// and of the marginalized particle filter.
pub fn complexity_estimate(c: &ComplexityInputs) -> (f64, f64) {
    let d = c.d as f64;
    let dl = c.d_l as f64;
    let dn = c.d_n as f64;
    let p = c.p as f64;
    let np = c.n_p as f64;
    let nit = c.n_it as f64;

    let tf_per_particle = p * dl * dl
        + p * p * dl
        + p * p * p
        + 6.0 * dl.powi(3)
        + 2.0 * dn * dl * dl
        + 3.0 * dl * dn * dn
        + dn.powi(3) / 3.0;
    let n_tf = 2.0 * d * p * p + p * d * d + (nit + 4.0) * d.powi(3) + nit * np * tf_per_particle;

    let mpf_per_particle = 2.0 * p * dl * dl
        + 3.0 * p * p * dl
        + p * p * p
        + 5.0 * dl.powi(3)
        + 2.0 * dl * dl * dn
        + 3.0 * dl * dn * dn
        + dn.powi(3) / 3.0;
    let n_mpf = np * mpf_per_particle;

    (n_tf, n_mpf)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn benchmark_dimension_values() {
        let c = ComplexityInputs::new(4, 2, 2, 3, 100, 1).unwrap();
        let (n_tf, n_mpf) = complexity_estimate(&c);
        // Hand evaluation: 72 + 48 + 320 + 100 * 443/3 and 100 * 563/3.
        assert_relative_eq!(n_tf, 440.0 + 44300.0 / 3.0, max_relative = 1e-12);
        assert_relative_eq!(n_mpf, 56300.0 / 3.0, max_relative = 1e-12);
    }

    #[test]
    fn particle_free_limit() {
        let c = ComplexityInputs::new(4, 2, 2, 3, 0, 1).unwrap();
        let (n_tf, n_mpf) = complexity_estimate(&c);
        assert_relative_eq!(n_tf, 2.0 * 4.0 * 9.0 + 3.0 * 16.0 + 5.0 * 64.0);
        assert_eq!(n_mpf, 0.0);
    }

    #[test]
    fn input_validation() {
        assert!(ComplexityInputs::new(4, 2, 1, 3, 10, 1).is_err());
        assert!(ComplexityInputs::new(3, 2, 1, 0, 10, 1).is_err());
        assert!(ComplexityInputs::new(3, 2, 1, 3, 10, 0).is_err());
    }
}
