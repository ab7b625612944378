use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Streaming means and co-moments of a fixed list of named observables.
///
/// `comoment[i * d + j]` holds `sum_r (x_ri - mean_i)(x_rj - mean_j)`.
/// Updates follow Welford; merges follow Chan et al., so any partition of
/// the replicates gives the same state up to rounding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McAccumulator {
    pub labels: Vec<String>,
    pub count: u64,
    pub mean: Vec<f64>,
    pub comoment: Vec<f64>,
}

impl McAccumulator {
    pub fn new<S: Into<String>>(labels: impl IntoIterator<Item = S>) -> Self {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        let d = labels.len();
        Self {
            labels,
            count: 0,
            mean: vec![0.0; d],
            comoment: vec![0.0; d * d],
        }
    }

    pub fn dim(&self) -> usize {
        self.labels.len()
    }

    pub fn index(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// Like [`Self::index`] but fails with a readable message.
    pub fn require(&self, label: &str) -> Result<usize> {
        self.index(label)
            .ok_or_else(|| Error::config(format!("accumulator does not track `{label}`")))
    }

    pub fn push(&mut self, x: &[f64]) {
        let d = self.dim();
        assert_eq!(x.len(), d, "observation length");
        self.count += 1;
        let n = self.count as f64;
        let mut delta = vec![0.0; d];
        for i in 0..d {
            delta[i] = x[i] - self.mean[i];
            self.mean[i] += delta[i] / n;
        }
        for i in 0..d {
            let after = x[i] - self.mean[i];
            let row = &mut self.comoment[i * d..(i + 1) * d];
            for j in 0..d {
                // Symmetric update: delta_j (x_i - mean_i^new).
                row[j] += delta[j] * after;
            }
        }
    }

    pub fn merge(&mut self, other: &McAccumulator) {
        assert_eq!(self.labels, other.labels, "merging accumulators of different observables");
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = other.clone();
            return;
        }
        let d = self.dim();
        let (na, nb) = (self.count as f64, other.count as f64);
        let n = na + nb;
        let delta: Vec<f64> = (0..d).map(|i| other.mean[i] - self.mean[i]).collect();
        for i in 0..d {
            for j in 0..d {
                self.comoment[i * d + j] += other.comoment[i * d + j] + delta[i] * delta[j] * na * nb / n;
            }
        }
        for i in 0..d {
            self.mean[i] += delta[i] * nb / n;
        }
        self.count += other.count;
    }

    /// Sample covariance `C_ij / (n - 1)`.
    pub fn covariance(&self, i: usize, j: usize) -> f64 {
        if self.count < 2 {
            return f64::NAN;
        }
        self.comoment[i * self.dim() + j] / (self.count - 1) as f64
    }

    pub fn variance(&self, i: usize) -> f64 {
        self.covariance(i, i)
    }

    pub fn std_error(&self, i: usize) -> f64 {
        (self.variance(i) / self.count as f64).sqrt()
    }

    /// Estimate of `E x_i` as a delta-method [`Estimate`].
    pub fn mean_of(&self, i: usize) -> Estimate {
        let mut g = vec![0.0; self.dim()];
        g[i] = 1.0;
        Estimate {
            value: self.mean[i],
            gradient: g,
        }
    }

    /// Sample covariance of `x` and `y`, given that `xy` tracks their
    /// product (needed for the standard error).
    pub fn covariance_of(&self, x: usize, y: usize, xy: usize) -> Estimate {
        let n = self.count as f64;
        let k = n / (n - 1.0);
        let mut g = vec![0.0; self.dim()];
        g[xy] += k;
        g[x] -= k * self.mean[y];
        g[y] -= k * self.mean[x];
        Estimate {
            value: self.covariance(x, y),
            gradient: g,
        }
    }

    /// `g' Sigma g / n` for a gradient over the tracked means.
    fn quadratic(&self, g: &[f64], h: &[f64]) -> f64 {
        let d = self.dim();
        let mut acc = 0.0;
        for i in 0..d {
            if g[i] == 0.0 {
                continue;
            }
            for j in 0..d {
                if h[j] != 0.0 {
                    acc += g[i] * h[j] * self.comoment[i * d + j];
                }
            }
        }
        acc / ((self.count - 1) as f64 * self.count as f64)
    }

    pub fn se(&self, e: &Estimate) -> f64 {
        self.quadratic(&e.gradient, &e.gradient).max(0.0).sqrt()
    }

    /// Estimated covariance of two estimators computed on the same replicates.
    pub fn cross(&self, a: &Estimate, b: &Estimate) -> f64 {
        self.quadratic(&a.gradient, &b.gradient)
    }

    /// Paired comparison of two estimators on the same replicates.
    pub fn paired(&self, lhs: &Estimate, rhs: &Estimate) -> Paired {
        let diff = lhs.sub(rhs);
        let se_diff = self.se(&diff);
        Paired {
            lhs: lhs.value,
            lhs_se: self.se(lhs),
            rhs: rhs.value,
            rhs_se: self.se(rhs),
            covariance: self.cross(lhs, rhs),
            z: z_score(diff.value, se_diff, lhs.value.abs().max(rhs.value.abs())),
            n: self.count,
        }
    }
}

/// `diff / se`, with the degenerate case of a deterministic difference
/// mapped to 0 (exact agreement) or an infinite score.
pub fn z_score(diff: f64, se: f64, scale: f64) -> f64 {
    let exact = 1e-9 * scale.max(1.0);
    if se > 1e-300 && se > 1e-12 * scale.max(1.0) {
        diff / se
    } else if diff.abs() <= exact {
        0.0
    } else {
        diff.signum() * f64::INFINITY
    }
}

/// A smooth function of tracked means, carried with its gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub gradient: Vec<f64>,
}

impl Estimate {
    pub fn constant(value: f64, dim: usize) -> Self {
        Self {
            value,
            gradient: vec![0.0; dim],
        }
    }

    pub fn scale(&self, a: f64) -> Self {
        Self {
            value: a * self.value,
            gradient: self.gradient.iter().map(|g| a * g).collect(),
        }
    }

    pub fn offset(&self, b: f64) -> Self {
        Self {
            value: self.value + b,
            gradient: self.gradient.clone(),
        }
    }

    pub fn add(&self, other: &Estimate) -> Self {
        Self {
            value: self.value + other.value,
            gradient: self.gradient.iter().zip(&other.gradient).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn sub(&self, other: &Estimate) -> Self {
        self.add(&other.scale(-1.0))
    }
}

/// Two paired estimates, their SEs, their estimated covariance and the
/// z-score of their difference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Paired {
    pub lhs: f64,
    pub lhs_se: f64,
    pub rhs: f64,
    pub rhs_se: f64,
    pub covariance: f64,
    pub z: f64,
    pub n: u64,
}
