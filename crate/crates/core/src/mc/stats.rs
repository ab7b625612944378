//! Reference distributions and goodness-of-fit helpers.

use nalgebra::DMatrix;
use statrs::distribution::{ContinuousCDF, Normal};

/// Asymptotic 1% critical value of the Kolmogorov distribution.
pub const KS_CRITICAL_1PCT: f64 = 1.6276;

/// CDF of the arcsine law on `[0, 1]`, the law of the argmax of Brownian
/// motion on the unit interval.
pub fn arcsine_cdf(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x >= 1.0 {
        1.0
    } else {
        std::f64::consts::FRAC_2_PI * x.sqrt().asin()
    }
}

pub fn standard_normal_cdf(x: f64) -> f64 {
    Normal::standard().cdf(x)
}

/// Two-sided Kolmogorov–Smirnov distance between a sample and a continuous
/// CDF. The sample is sorted in place.
pub fn ks_statistic(sample: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
    sample.sort_by(f64::total_cmp);
    let n = sample.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in sample.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i + 1) as f64 / n - f).max(f - i as f64 / n);
    }
    d
}

pub fn ks_critical_1pct(n: usize) -> f64 {
    KS_CRITICAL_1PCT / (n as f64).sqrt()
}

/// Sample covariance matrix of stored draws (one row per replicate) and the
/// standard error of each entry, estimated from the fourth-moment products
/// `(x_i - m_i)(x_j - m_j)`.
pub fn empirical_covariance(rows: &[Vec<f64>]) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = rows.len();
    let d = rows[0].len();
    let nf = n as f64;
    let mean: Vec<f64> = (0..d).map(|i| rows.iter().map(|r| r[i]).sum::<f64>() / nf).collect();
    let mut cov = DMatrix::zeros(d, d);
    let mut se = DMatrix::zeros(d, d);
    for i in 0..d {
        for j in i..d {
            let prods: Vec<f64> = rows.iter().map(|r| (r[i] - mean[i]) * (r[j] - mean[j])).collect();
            let c = prods.iter().sum::<f64>() / (nf - 1.0);
            let pm = prods.iter().sum::<f64>() / nf;
            let v = prods.iter().map(|p| (p - pm).powi(2)).sum::<f64>() / (nf - 1.0);
            cov[(i, j)] = c;
            cov[(j, i)] = c;
            se[(i, j)] = (v / nf).sqrt();
            se[(j, i)] = se[(i, j)];
        }
    }
    (cov, se)
}
