//! Aggregate statistics for Monte Carlo runs: bias, empirical and theoretical
//! standard deviations, confidence-interval coverage, and normality
//! diagnostics of the standardized estimation errors.

use serde::{Deserialize, Serialize};

/// Standard normal CDF via an erfc rational approximation (absolute error
/// below 1.2e-7, ample for the KS diagnostic).
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

fn erfc(x: f64) -> f64 {
    let z = x.abs();
    let t = 1.0 / (1.0 + 0.5 * z);
    let mut poly = 0.17087277;
    for c in [
        -0.82215223,
        1.48851587,
        -1.13520398,
        0.27886807,
        -0.18628806,
        0.09678418,
        0.37409196,
        1.00002368,
    ] {
        poly = c + t * poly;
    }
    let ans = t * (-z * z - 1.26551223 + t * poly).exp();
    if x >= 0.0 {
        ans
    } else {
        2.0 - ans
    }
}

/// One-sample Kolmogorov-Smirnov distance against the standard normal.
pub fn ks_distance_standard_normal(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut d = 0.0_f64;
    for (i, &x) in sorted.iter().enumerate() {
        let cdf = normal_cdf(x);
        d = d.max((cdf - i as f64 / n).abs());
        d = d.max(((i as f64 + 1.0) / n - cdf).abs());
    }
    d
}

/// Sample moments used across the summaries.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MomentStats {
    pub mean: f64,
    pub sd: Option<f64>,
    pub skewness: Option<f64>,
    pub excess_kurtosis: Option<f64>,
}

pub fn moment_stats(values: &[f64]) -> MomentStats {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return MomentStats {
            mean,
            sd: None,
            skewness: None,
            excess_kurtosis: None,
        };
    }
    let m2 = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let m3 = values.iter().map(|v| (v - mean).powi(3)).sum::<f64>() / n;
    let m4 = values.iter().map(|v| (v - mean).powi(4)).sum::<f64>() / n;
    let sd_sample =
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    MomentStats {
        mean,
        sd: Some(sd_sample),
        skewness: (m2 > 0.0).then(|| m3 / m2.powf(1.5)),
        excess_kurtosis: (m2 > 0.0).then(|| m4 / (m2 * m2) - 3.0),
    }
}

/// Per-coordinate aggregate of a Monte Carlo study.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoordinateSummary {
    pub name: String,
    pub truth: f64,
    pub replications: usize,
    pub bias: f64,
    pub sd_empirical: Option<f64>,
    /// (Gamma^{-1}/rate)_kk^{1/2} from the same Gamma the estimator used.
    pub sd_theoretical: Option<f64>,
    pub sd_ratio: Option<f64>,
    pub coverage95: Option<f64>,
    /// Moments and KS distance of the standardized errors.
    pub standardized_mean: f64,
    pub skewness: Option<f64>,
    pub excess_kurtosis: Option<f64>,
    pub ks_distance: Option<f64>,
}

/// Build the per-coordinate summary from raw estimates, standardized errors,
/// and per-replication CI hits.
pub fn coordinate_summary(
    name: &str,
    truth: f64,
    estimates: &[f64],
    standardized: &[f64],
    ci_hits: &[bool],
    sd_theoretical: Option<f64>,
) -> CoordinateSummary {
    let est = moment_stats(estimates);
    let std = moment_stats(standardized);
    let coverage = if ci_hits.is_empty() {
        None
    } else {
        Some(ci_hits.iter().filter(|&&h| h).count() as f64 / ci_hits.len() as f64)
    };
    CoordinateSummary {
        name: name.into(),
        truth,
        replications: estimates.len(),
        bias: est.mean - truth,
        sd_empirical: est.sd,
        sd_theoretical,
        sd_ratio: match (est.sd, sd_theoretical) {
            (Some(e), Some(t)) if t > 0.0 => Some(e / t),
            _ => None,
        },
        coverage95: coverage,
        standardized_mean: std.mean,
        skewness: std.skewness,
        excess_kurtosis: std.excess_kurtosis,
        ks_distance: (standardized.len() > 1).then(|| ks_distance_standard_normal(standardized)),
    }
}
