//! Small statistics helpers for the Monte Carlo harness.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

/// Asymptotic Kolmogorov–Smirnov coefficient at the 1% level.
pub const KS_COEFF_1PCT: f64 = 1.628;

/// A point estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub se: f64,
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample mean with its naive standard error.
pub fn mean_se(xs: &[f64]) -> Estimate {
    let n = xs.len() as f64;
    let m = mean(xs);
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    Estimate { value: m, se: (var / n).sqrt() }
}

/// Mean with a batch-means standard error over `n_batches` contiguous batches.
///
/// Falls back to the naive SE when there are fewer points than batches.
pub fn batch_means(xs: &[f64], n_batches: usize) -> Estimate {
    if xs.len() < 2 * n_batches.max(1) {
        return mean_se(xs);
    }
    let sizes = crate::par::chunk_sizes(xs.len(), n_batches);
    let mut start = 0;
    let batch: Vec<f64> = sizes
        .iter()
        .map(|&k| {
            let m = mean(&xs[start..start + k]);
            start += k;
            m
        })
        .collect();
    let value = mean(xs);
    // batches differ in size by at most one; weight them equally
    let b = batch.len() as f64;
    let var = batch.iter().map(|m| (m - value).powi(2)).sum::<f64>() / (b - 1.0);
    Estimate { value, se: (var / b).sqrt() }
}

/// Lag-1 sample autocorrelation.
pub fn lag1_autocorrelation(xs: &[f64]) -> f64 {
    let m = mean(xs);
    let denom: f64 = xs.iter().map(|x| (x - m).powi(2)).sum();
    let num: f64 = xs.windows(2).map(|w| (w[0] - m) * (w[1] - m)).sum();
    num / denom
}

/// One-sample KS statistic `sup |F_n - F|`.
pub fn ks_statistic(sample: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut xs = sample.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

/// Two-sample KS statistic.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut xa = a.to_vec();
    let mut xb = b.to_vec();
    xa.sort_by(f64::total_cmp);
    xb.sort_by(f64::total_cmp);
    let (na, nb) = (xa.len() as f64, xb.len() as f64);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < xa.len() && j < xb.len() {
        let x = xa[i].min(xb[j]);
        while i < xa.len() && xa[i] <= x {
            i += 1;
        }
        while j < xb.len() && xb[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

pub fn ks_critical_1pct(n: usize) -> f64 {
    KS_COEFF_1PCT / (n as f64).sqrt()
}

pub fn ks_two_sample_critical_1pct(n: usize, m: usize) -> f64 {
    KS_COEFF_1PCT * ((n + m) as f64 / (n * m) as f64).sqrt()
}

pub fn standard_normal_cdf(x: f64) -> f64 {
    Normal::standard().cdf(x)
}
