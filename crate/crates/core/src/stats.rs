//! Seeded bootstrap helpers for comparing per-round summaries.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

pub fn std_dev(values: &[f64]) -> f64 {
    let m = mean(values);
    let n = values.len() as f64;
    (values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

fn resample_mean<R: Rng>(values: &[f64], rng: &mut R) -> f64 {
    let n = values.len();
    (0..n).map(|_| values[rng.random_range(0..n)]).sum::<f64>() / n as f64
}

/// Bootstrap distribution of the mean.
pub fn bootstrap_means(values: &[f64], resamples: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..resamples)
        .map(|_| resample_mean(values, &mut rng))
        .collect()
}

/// Bootstrap standard error of the mean.
pub fn bootstrap_se(values: &[f64], resamples: usize, seed: u64) -> f64 {
    std_dev(&bootstrap_means(values, resamples, seed))
}

/// Linear-interpolated quantile of `sorted` at `q ∈ [0, 1]`.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Percentile interval for `mean(a) - mean(b)` with the two samples
/// resampled independently.
pub fn bootstrap_diff_ci(
    a: &[f64],
    b: &[f64],
    resamples: usize,
    level: f64,
    seed: u64,
) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut diffs: Vec<f64> = (0..resamples)
        .map(|_| resample_mean(a, &mut rng) - resample_mean(b, &mut rng))
        .collect();
    diffs.sort_by(f64::total_cmp);
    let tail = (1.0 - level) / 2.0;
    (quantile(&diffs, tail), quantile(&diffs, 1.0 - tail))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basic_moments() {
        assert_eq!(mean(&[1.0, 2.0, 3.0]), 2.0);
        assert!((std_dev(&[1.0, 2.0, 3.0]) - 1.0).abs() < 1e-12);
        assert_eq!(quantile(&[0.0, 10.0], 0.25), 2.5);
    }

    #[test]
    fn se_matches_analytic_value() {
        // iid values: SE ≈ sd / sqrt(n)
        let values: Vec<f64> = (0..400).map(|i| f64::from(i % 20)).collect();
        let se = bootstrap_se(&values, 4000, 1);
        let analytic = std_dev(&values) / 20.0;
        assert!((se / analytic - 1.0).abs() < 0.1, "{se} vs {analytic}");
    }

    #[test]
    fn separated_samples_have_positive_interval() {
        let a: Vec<f64> = (0..100).map(|i| 10.0 + f64::from(i % 5)).collect();
        let b: Vec<f64> = (0..100).map(|i| 5.0 + f64::from(i % 5)).collect();
        let (lo, hi) = bootstrap_diff_ci(&a, &b, 2000, 0.95, 3);
        assert!(lo > 4.0 && hi < 6.0);
    }
}
