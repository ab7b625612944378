//! Covariance kernels of the Gaussian families and their validation.
//!
//! Every family is evaluated in closed form. Domain points are passed as
//! coordinate slices; one-parameter families take slices of length one.

mod checks;
mod drift;

pub use checks::{
    check_monotone_in_first_arg, validate_anchor_conditions, ConditionReport, ConditionResult,
    CONDITION_TOLERANCE,
    MonotoneReport, MonotoneViolation,
};
pub use drift::{Continuity, DriftForm, DriftSpec};

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Slack allowed when checking that a point lies in a closed domain.
pub const DOMAIN_SLACK: f64 = 1e-12;

/// Relative tolerance on the smallest eigenvalue of a kernel matrix.
pub const PSD_TOLERANCE: f64 = 1e-8;

/// Anything that can serve as a covariance function on a fixed-dimension domain.
pub trait Covariance {
    fn dim(&self) -> usize;
    fn covariance(&self, u: &[f64], v: &[f64]) -> Result<f64>;
}

/// Declarative description of a covariance family and its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawKernelSpec", into = "RawKernelSpec")]
pub enum KernelSpec {
    BrownianMotion { horizon: f64 },
    OrnsteinUhlenbeck { gamma: f64, sigma: f64, horizon: f64 },
    /// `hurst` in `(0, 1]`; `hurst = 1` is the degenerate rank-one kernel `uv`.
    FractionalBm { hurst: f64, horizon: f64 },
    /// Brownian sheet plus independent Brownian motions on the axes.
    BrownianSheetFrontier { horizon: Vec<f64> },
    /// Bare product-of-minima sheet, without the frontier motions.
    BrownianSheet { horizon: Vec<f64> },
    LinearCov { horizon: Vec<f64> },
    /// Additive Brownian motion on the `stages`-dimensional simplex.
    AdditiveBm { stages: usize },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
enum RawKernelSpec {
    BrownianMotion {
        #[serde(default = "unit")]
        horizon: f64,
    },
    OrnsteinUhlenbeck {
        gamma: f64,
        sigma: f64,
        #[serde(default = "unit")]
        horizon: f64,
    },
    FractionalBm {
        hurst: f64,
        #[serde(default = "unit")]
        horizon: f64,
    },
    BrownianSheetFrontier {
        horizon: Vec<f64>,
    },
    BrownianSheet {
        horizon: Vec<f64>,
    },
    LinearCov {
        horizon: Vec<f64>,
    },
    AdditiveBm {
        stages: usize,
    },
}

fn unit() -> f64 {
    1.0
}

impl TryFrom<RawKernelSpec> for KernelSpec {
    type Error = Error;

    fn try_from(raw: RawKernelSpec) -> Result<Self> {
        let spec = match raw {
            RawKernelSpec::BrownianMotion { horizon } => KernelSpec::BrownianMotion { horizon },
            RawKernelSpec::OrnsteinUhlenbeck { gamma, sigma, horizon } => {
                KernelSpec::OrnsteinUhlenbeck { gamma, sigma, horizon }
            }
            RawKernelSpec::FractionalBm { hurst, horizon } => {
                KernelSpec::FractionalBm { hurst, horizon }
            }
            RawKernelSpec::BrownianSheetFrontier { horizon } => {
                KernelSpec::BrownianSheetFrontier { horizon }
            }
            RawKernelSpec::BrownianSheet { horizon } => KernelSpec::BrownianSheet { horizon },
            RawKernelSpec::LinearCov { horizon } => KernelSpec::LinearCov { horizon },
            RawKernelSpec::AdditiveBm { stages } => KernelSpec::AdditiveBm { stages },
        };
        spec.validate()?;
        Ok(spec)
    }
}

impl From<KernelSpec> for RawKernelSpec {
    fn from(spec: KernelSpec) -> Self {
        match spec {
            KernelSpec::BrownianMotion { horizon } => RawKernelSpec::BrownianMotion { horizon },
            KernelSpec::OrnsteinUhlenbeck { gamma, sigma, horizon } => {
                RawKernelSpec::OrnsteinUhlenbeck { gamma, sigma, horizon }
            }
            KernelSpec::FractionalBm { hurst, horizon } => {
                RawKernelSpec::FractionalBm { hurst, horizon }
            }
            KernelSpec::BrownianSheetFrontier { horizon } => {
                RawKernelSpec::BrownianSheetFrontier { horizon }
            }
            KernelSpec::BrownianSheet { horizon } => RawKernelSpec::BrownianSheet { horizon },
            KernelSpec::LinearCov { horizon } => RawKernelSpec::LinearCov { horizon },
            KernelSpec::AdditiveBm { stages } => RawKernelSpec::AdditiveBm { stages },
        }
    }
}

fn positive(name: &str, x: f64) -> Result<()> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("{name} must be finite and > 0, got {x}")))
    }
}

fn horizons(h: &[f64]) -> Result<()> {
    if h.is_empty() {
        return Err(Error::domain("dimension must be >= 1"));
    }
    for (i, &t) in h.iter().enumerate() {
        positive(&format!("horizon[{i}]"), t)?;
    }
    Ok(())
}

impl KernelSpec {
    pub fn brownian(horizon: f64) -> Result<Self> {
        Self::checked(KernelSpec::BrownianMotion { horizon })
    }

    pub fn ornstein_uhlenbeck(gamma: f64, sigma: f64, horizon: f64) -> Result<Self> {
        Self::checked(KernelSpec::OrnsteinUhlenbeck { gamma, sigma, horizon })
    }

    pub fn fbm(hurst: f64, horizon: f64) -> Result<Self> {
        Self::checked(KernelSpec::FractionalBm { hurst, horizon })
    }

    pub fn sheet_frontier(horizon: Vec<f64>) -> Result<Self> {
        Self::checked(KernelSpec::BrownianSheetFrontier { horizon })
    }

    pub fn sheet(horizon: Vec<f64>) -> Result<Self> {
        Self::checked(KernelSpec::BrownianSheet { horizon })
    }

    pub fn linear(horizon: Vec<f64>) -> Result<Self> {
        Self::checked(KernelSpec::LinearCov { horizon })
    }

    pub fn additive(stages: usize) -> Result<Self> {
        Self::checked(KernelSpec::AdditiveBm { stages })
    }

    fn checked(spec: Self) -> Result<Self> {
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            KernelSpec::BrownianMotion { horizon } => positive("horizon", *horizon),
            KernelSpec::OrnsteinUhlenbeck { gamma, sigma, horizon } => {
                positive("gamma", *gamma)?;
                positive("sigma", *sigma)?;
                positive("horizon", *horizon)
            }
            KernelSpec::FractionalBm { hurst, horizon } => {
                if !(hurst.is_finite() && *hurst > 0.0 && *hurst <= 1.0) {
                    return Err(Error::domain(format!("hurst must lie in (0, 1], got {hurst}")));
                }
                positive("horizon", *horizon)
            }
            KernelSpec::BrownianSheetFrontier { horizon }
            | KernelSpec::BrownianSheet { horizon }
            | KernelSpec::LinearCov { horizon } => horizons(horizon),
            KernelSpec::AdditiveBm { stages } => {
                if *stages == 0 {
                    Err(Error::domain("additive Brownian motion needs at least one stage"))
                } else {
                    Ok(())
                }
            }
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            KernelSpec::BrownianMotion { .. }
            | KernelSpec::OrnsteinUhlenbeck { .. }
            | KernelSpec::FractionalBm { .. } => 1,
            KernelSpec::BrownianSheetFrontier { horizon }
            | KernelSpec::BrownianSheet { horizon }
            | KernelSpec::LinearCov { horizon } => horizon.len(),
            KernelSpec::AdditiveBm { stages } => *stages,
        }
    }

    /// Upper bound of each coordinate (the simplex is bounded by 1).
    pub fn horizon(&self) -> Vec<f64> {
        match self {
            KernelSpec::BrownianMotion { horizon }
            | KernelSpec::OrnsteinUhlenbeck { horizon, .. }
            | KernelSpec::FractionalBm { horizon, .. } => vec![*horizon],
            KernelSpec::BrownianSheetFrontier { horizon }
            | KernelSpec::BrownianSheet { horizon }
            | KernelSpec::LinearCov { horizon } => horizon.clone(),
            KernelSpec::AdditiveBm { stages } => vec![1.0; *stages],
        }
    }

    pub fn is_one_dimensional(&self) -> bool {
        matches!(
            self,
            KernelSpec::BrownianMotion { .. }
                | KernelSpec::OrnsteinUhlenbeck { .. }
                | KernelSpec::FractionalBm { .. }
        )
    }

    pub fn family_name(&self) -> &'static str {
        match self {
            KernelSpec::BrownianMotion { .. } => "brownian_motion",
            KernelSpec::OrnsteinUhlenbeck { .. } => "ornstein_uhlenbeck",
            KernelSpec::FractionalBm { .. } => "fractional_bm",
            KernelSpec::BrownianSheetFrontier { .. } => "brownian_sheet_frontier",
            KernelSpec::BrownianSheet { .. } => "brownian_sheet",
            KernelSpec::LinearCov { .. } => "linear_cov",
            KernelSpec::AdditiveBm { .. } => "additive_bm",
        }
    }

    pub fn contains(&self, u: &[f64]) -> bool {
        if u.len() != self.dim() || u.iter().any(|x| !x.is_finite()) {
            return false;
        }
        match self {
            KernelSpec::AdditiveBm { .. } => {
                u.iter().all(|&x| x >= -DOMAIN_SLACK) && u.iter().sum::<f64>() <= 1.0 + DOMAIN_SLACK
            }
            _ => u
                .iter()
                .zip(self.horizon())
                .all(|(&x, t)| x >= -DOMAIN_SLACK && x <= t + DOMAIN_SLACK),
        }
    }

    fn check_point(&self, u: &[f64]) -> Result<()> {
        if self.contains(u) {
            Ok(())
        } else {
            Err(Error::domain(format!(
                "point {u:?} outside the domain of {}",
                self.family_name()
            )))
        }
    }

    /// Closed-form covariance without the domain check. Callers on hot paths
    /// that already hold validated grid points use this directly.
    pub fn eval_unchecked(&self, u: &[f64], v: &[f64]) -> f64 {
        match self {
            KernelSpec::BrownianMotion { .. } => u[0].min(v[0]),
            KernelSpec::OrnsteinUhlenbeck { gamma, sigma, .. } => {
                let (s, t) = (u[0], v[0]);
                sigma * sigma / (2.0 * gamma) * ((-gamma * (s - t).abs()).exp() - (-gamma * (s + t)).exp())
            }
            KernelSpec::FractionalBm { hurst, .. } => {
                let two_h = 2.0 * hurst;
                let (s, t) = (u[0].max(0.0), v[0].max(0.0));
                0.5 * (s.powf(two_h) + t.powf(two_h) - (s - t).abs().powf(two_h))
            }
            KernelSpec::BrownianSheetFrontier { .. } => {
                sheet_product(u, v) + u.iter().zip(v).map(|(a, b)| a.min(*b)).sum::<f64>()
            }
            KernelSpec::BrownianSheet { .. } => sheet_product(u, v),
            KernelSpec::LinearCov { .. } => u.iter().zip(v).map(|(a, b)| a * b).sum(),
            KernelSpec::AdditiveBm { stages } => additive_overlap(*stages, u, v),
        }
    }
}

fn sheet_product(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| a.min(*b).max(0.0)).product()
}

/// `Cov(X(u), X(v))` for the additive field: stage `i` uses Brownian motion
/// `B^(i)` over `[p_i, p_{i+1}]`, so the covariance is the total overlap of the
/// stage intervals.
fn additive_overlap(stages: usize, u: &[f64], v: &[f64]) -> f64 {
    let mut total = 0.0;
    let (mut pu, mut pv) = (0.0, 0.0);
    for i in 0..=stages {
        let (nu, nv) = if i == stages {
            (1.0, 1.0)
        } else {
            (pu + u[i], pv + v[i])
        };
        let overlap = nu.min(nv) - f64::max(pu, pv);
        if overlap > 0.0 {
            total += overlap;
        }
        pu = nu;
        pv = nv;
    }
    total
}

impl Covariance for KernelSpec {
    fn dim(&self) -> usize {
        KernelSpec::dim(self)
    }

    fn covariance(&self, u: &[f64], v: &[f64]) -> Result<f64> {
        kernel_eval(self, u, v)
    }
}

impl<C: Covariance + ?Sized> Covariance for &C {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn covariance(&self, u: &[f64], v: &[f64]) -> Result<f64> {
        (**self).covariance(u, v)
    }
}

/// `R(u, v)` for the given family.
pub fn kernel_eval(spec: &KernelSpec, u: &[f64], v: &[f64]) -> Result<f64> {
    spec.check_point(u)?;
    spec.check_point(v)?;
    Ok(spec.eval_unchecked(u, v))
}

/// Kernel matrix over `points`, validated to be positive semidefinite up to
/// `PSD_TOLERANCE` relative to the largest eigenvalue.
pub fn kernel_matrix<C: Covariance>(kernel: &C, points: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let m = raw_kernel_matrix(kernel, points)?;
    check_psd(&m)?;
    Ok(m)
}

/// Symmetric kernel matrix without the eigenvalue check.
pub fn raw_kernel_matrix<C: Covariance>(kernel: &C, points: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    for (i, p) in points.iter().enumerate() {
        for q in &points[..i] {
            if p == q {
                return Err(Error::domain(format!("grid point {p:?} is repeated")));
            }
        }
    }
    let n = points.len();
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let r = kernel.covariance(&points[i], &points[j])?;
            m[(i, j)] = r;
            m[(j, i)] = r;
        }
    }
    Ok(m)
}

/// Smallest and largest eigenvalue of a symmetric matrix.
pub fn eigen_range(m: &DMatrix<f64>) -> (f64, f64) {
    if m.nrows() == 0 {
        return (0.0, 0.0);
    }
    let eig = SymmetricEigen::new(m.clone());
    let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    let max = eig.eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (min, max)
}

pub fn check_psd(m: &DMatrix<f64>) -> Result<()> {
    let (min, max) = eigen_range(m);
    if min < -PSD_TOLERANCE * max.abs().max(f64::MIN_POSITIVE) {
        return Err(Error::KernelInvalid(format!(
            "kernel matrix is not positive semidefinite: min eigenvalue {min:e}, max {max:e}"
        )));
    }
    Ok(())
}
