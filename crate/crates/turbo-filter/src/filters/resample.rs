//! Weight normalization and systematic resampling.

use rand::Rng;

/// Normalizes log-domain weights by max-subtraction. Returns `None` when the
/// weights are degenerate (all `-inf`, or a NaN crept in), i.e. when every
/// particle weight is effectively zero.
pub fn normalize_log_weights(log_w: &[f64]) -> Option<Vec<f64>> {
    let max = log_w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return None;
    }
    let w: Vec<f64> = log_w.iter().map(|lw| (lw - max).exp()).collect();
    let sum: f64 = w.iter().sum();
    if !(sum > 0.0) || !sum.is_finite() {
        return None;
    }
    Some(w.iter().map(|v| v / sum).collect())
}

/// Systematic resampling: one uniform draw positions a comb of `n` equally
/// spaced pointers over the cumulative weights. Preserves the particle count
/// and is the standard low-variance replacement scheme.
pub fn systematic_resample<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> Vec<usize> {
    let n = weights.len();
    let mut indices = Vec::with_capacity(n);
    if n == 0 {
        return indices;
    }
    let u0: f64 = rng.random::<f64>() / n as f64;
    let mut cum = weights[0];
    let mut i = 0usize;
    for j in 0..n {
        let u = u0 + j as f64 / n as f64;
        while u > cum && i + 1 < n {
            i += 1;
            cum += weights[i];
        }
        indices.push(i);
    }
    indices
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::SeedableRng;

    #[test]
    fn normalize_plain_weights() {
        let lw = [2.0f64.ln(), 2.0f64.ln()];
        let w = normalize_log_weights(&lw).unwrap();
        assert_eq!(w, vec![0.5, 0.5]);
    }

    #[test]
    fn normalize_handles_large_offsets() {
        let w = normalize_log_weights(&[-1e4, -1e4 + 2.0f64.ln()]).unwrap();
        assert!((w[0] - 1.0 / 3.0).abs() < 1e-12);
        assert!((w[1] - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn normalize_detects_degenerate() {
        assert!(normalize_log_weights(&[f64::NEG_INFINITY, f64::NEG_INFINITY]).is_none());
        assert!(normalize_log_weights(&[0.0, f64::NAN]).is_none());
    }

    #[test]
    fn degenerate_weight_copies_single_particle() {
        let mut rng = StdRng::seed_from_u64(1);
        let idx = systematic_resample(&[1.0, 0.0, 0.0, 0.0], &mut rng);
        assert_eq!(idx, vec![0, 0, 0, 0]);
    }

    #[test]
    fn uniform_weights_keep_every_particle() {
        let mut rng = StdRng::seed_from_u64(2);
        let idx = systematic_resample(&[0.25; 4], &mut rng);
        assert_eq!(idx, vec![0, 1, 2, 3]);
    }

    #[test]
    fn counts_track_weights() {
        let mut rng = StdRng::seed_from_u64(3);
        let weights = [0.5, 0.3, 0.2];
        let mut counts = [0usize; 3];
        for _ in 0..1000 {
            for i in systematic_resample(&weights, &mut rng) {
                counts[i] += 1;
            }
        }
        for (c, w) in counts.iter().zip(&weights) {
            let expected = w * 3.0 * 1000.0;
            assert!(((*c as f64) - expected).abs() < 0.05 * 3000.0);
        }
    }
}
