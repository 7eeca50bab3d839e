//! Shared sampling primitives.
//!
//! Gaussian variates use the Marsaglia polar method, fixed here so that
//! trajectories are bit-stable for a given seed on a given platform.

use rand::Rng;
use rand_distr::{Binomial, Distribution};

/// One standard normal variate via the polar method. The second variate of
/// each accepted pair is discarded, keeping the sampler stateless.
pub fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let u = 2.0 * rng.random::<f64>() - 1.0;
        let v = 2.0 * rng.random::<f64>() - 1.0;
        let s = u * u + v * v;
        if s > 0.0 && s < 1.0 {
            return u * (-2.0 * s.ln() / s).sqrt();
        }
    }
}

/// Samples an index with the given weights (non-negative, summing to 1).
pub fn sample_categorical<R: Rng + ?Sized>(rng: &mut R, weights: &[f64]) -> usize {
    let u: f64 = rng.random();
    let last_positive = weights
        .iter()
        .rposition(|&w| w > 0.0)
        .expect("categorical weights must carry positive mass");
    let mut acc = 0.0;
    for (i, &w) in weights.iter().enumerate().take(last_positive) {
        acc += w;
        if u < acc {
            return i;
        }
    }
    last_positive
}

/// Draws the outcome counts of `m` iid samples from the given distribution.
///
/// Uses the conditional-binomial decomposition of the multinomial, which is
/// exact in distribution and costs one binomial draw per outcome instead of
/// one categorical draw per sample.
pub fn multinomial_counts<R: Rng + ?Sized>(rng: &mut R, weights: &[f64], m: u64) -> Vec<u64> {
    let mut counts = vec![0u64; weights.len()];
    let last_positive = weights
        .iter()
        .rposition(|&w| w > 0.0)
        .expect("multinomial weights must carry positive mass");
    let mut remaining = m;
    let mut rest = 1.0f64;
    for (i, &w) in weights.iter().enumerate().take(last_positive + 1) {
        if remaining == 0 {
            break;
        }
        if i == last_positive {
            counts[i] = remaining;
            break;
        }
        let p = (w / rest).clamp(0.0, 1.0);
        let c = if p >= 1.0 {
            remaining
        } else if p <= 0.0 {
            0
        } else {
            Binomial::new(remaining, p)
                .expect("binomial parameters in range")
                .sample(rng)
        };
        counts[i] = c;
        remaining -= c;
        rest -= w;
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn normal_moments_are_sane() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 200_000;
        let (mut sum, mut sum_sq) = (0.0, 0.0);
        for _ in 0..n {
            let z = standard_normal(&mut rng);
            sum += z;
            sum_sq += z * z;
        }
        let mean = sum / n as f64;
        let var = sum_sq / n as f64 - mean * mean;
        assert!(mean.abs() < 0.01, "mean {mean}");
        assert!((var - 1.0).abs() < 0.02, "var {var}");
    }

    #[test]
    fn categorical_never_returns_zero_weight_outcome() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let weights = [0.0, 0.5, 0.0, 0.5, 0.0];
        for _ in 0..10_000 {
            let i = sample_categorical(&mut rng, &weights);
            assert!(weights[i] > 0.0);
        }
    }

    #[test]
    fn multinomial_counts_sum_to_m_and_respect_support() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let weights = [0.2, 0.0, 0.5, 0.3];
        for m in [0u64, 1, 17, 100_000] {
            let counts = multinomial_counts(&mut rng, &weights, m);
            assert_eq!(counts.iter().sum::<u64>(), m);
            assert_eq!(counts[1], 0);
        }
    }

    #[test]
    fn multinomial_matches_categorical_frequencies() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let weights = [0.1, 0.6, 0.3];
        let m = 600_000u64;
        let counts = multinomial_counts(&mut rng, &weights, m);
        for (c, w) in counts.iter().zip(weights.iter()) {
            let freq = *c as f64 / m as f64;
            // 5 sigma on a binomial proportion.
            let tol = 5.0 * (w * (1.0 - w) / m as f64).sqrt();
            assert!((freq - w).abs() < tol, "freq {freq} vs weight {w}");
        }
    }
}
