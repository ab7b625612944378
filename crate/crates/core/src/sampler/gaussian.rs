//! Exact samplers for centered Gaussian processes on grids.

use std::sync::Arc;

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use realfft::num_complex::Complex;
use realfft::{ComplexToReal, RealFftPlanner};

use super::{Grid, GridSpec, PathSample, SeedSpec};
use crate::error::{Error, Result};
use crate::kernels::{raw_kernel_matrix, Covariance, KernelSpec};

/// Embedding eigenvalues below this are a genuine failure of the circulant
/// method; smaller negative values are rounding and are clamped to zero.
pub const EMBEDDING_TOLERANCE: f64 = 1e-8;

/// Largest point count the dense Cholesky fallback accepts.
pub const CHOLESKY_MAX_POINTS: usize = 4096;

#[inline]
pub(crate) fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

/// Which exact method a [`GaussianPathSampler`] uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplingMethod {
    IndependentIncrements,
    Autoregressive,
    CirculantEmbedding,
    Cholesky,
}

/// Pre-factored sampler for a one-parameter Gaussian kernel on a uniform grid.
/// Construction does all the linear algebra; `sample` only draws normals.
pub struct GaussianPathSampler {
    grid: Arc<Grid>,
    inner: Inner,
}

enum Inner {
    Increments { sd: f64 },
    Autoregressive { decay: f64, sd: f64 },
    Circulant(CirculantFgn),
    Cholesky(CholeskySampler),
}

impl GaussianPathSampler {
    pub fn new(kernel: &KernelSpec, grid: Arc<Grid>) -> Result<Self> {
        kernel.validate()?;
        if !kernel.is_one_dimensional() {
            return Err(Error::config(format!(
                "{} is not a one-parameter kernel",
                kernel.family_name()
            )));
        }
        let (n, horizon) = match grid.spec() {
            GridSpec::Uniform { n, horizon } => (*n, *horizon),
            _ => return Err(Error::grid("one-parameter kernels need a uniform grid")),
        };
        let kh = kernel.horizon()[0];
        if horizon > kh * (1.0 + 1e-12) {
            return Err(Error::domain(format!(
                "grid horizon {horizon} exceeds the kernel horizon {kh}"
            )));
        }
        let dt = horizon / n as f64;
        let inner = match kernel {
            KernelSpec::BrownianMotion { .. } => Inner::Increments { sd: dt.sqrt() },
            KernelSpec::OrnsteinUhlenbeck { gamma, sigma, .. } => {
                let decay = (-gamma * dt).exp();
                let var = sigma * sigma / (2.0 * gamma) * -(-2.0 * gamma * dt).exp_m1();
                Inner::Autoregressive {
                    decay,
                    sd: var.sqrt(),
                }
            }
            KernelSpec::FractionalBm { hurst, .. } => match CirculantFgn::new(*hurst, n, dt) {
                Ok(c) => Inner::Circulant(c),
                Err(Error::KernelInvalid(_)) => {
                    Inner::Cholesky(CholeskySampler::new(kernel, &grid.point_list())?)
                }
                Err(e) => return Err(e),
            },
            _ => unreachable!(),
        };
        Ok(Self { grid, inner })
    }

    pub fn method(&self) -> SamplingMethod {
        match self.inner {
            Inner::Increments { .. } => SamplingMethod::IndependentIncrements,
            Inner::Autoregressive { .. } => SamplingMethod::Autoregressive,
            Inner::Circulant(_) => SamplingMethod::CirculantEmbedding,
            Inner::Cholesky(_) => SamplingMethod::Cholesky,
        }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn sample(&self, seed: SeedSpec) -> PathSample {
        let mut rng = seed.rng();
        self.sample_with(&mut rng)
    }

    pub fn sample_with<R: Rng + ?Sized>(&self, rng: &mut R) -> PathSample {
        let n = self.grid.len() - 1;
        let mut values = vec![0.0; n + 1];
        match &self.inner {
            Inner::Increments { sd } => {
                let mut x = 0.0;
                for v in values.iter_mut().skip(1) {
                    x += sd * normal(rng);
                    *v = x;
                }
            }
            Inner::Autoregressive { decay, sd } => {
                let mut x = 0.0;
                for v in values.iter_mut().skip(1) {
                    x = decay * x + sd * normal(rng);
                    *v = x;
                }
            }
            Inner::Circulant(c) => {
                let incr = c.sample_increments(rng);
                let mut x = 0.0;
                for (v, d) in values.iter_mut().skip(1).zip(incr) {
                    x += d;
                    *v = x;
                }
            }
            Inner::Cholesky(c) => values = c.sample_with(rng),
        }
        PathSample {
            grid: self.grid.clone(),
            values,
            jumps: None,
        }
    }
}

/// Circulant embedding of fractional Gaussian noise (stationary increments of
/// fBm) of length `n`, scaled to spacing `dt`.
pub struct CirculantFgn {
    n: usize,
    /// `sqrt(lambda_k / m)` for `k = 0..=n`, with `m = 2n`.
    amplitude: Vec<f64>,
    fft: Arc<dyn ComplexToReal<f64>>,
    scale: f64,
}

impl std::fmt::Debug for CirculantFgn {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CirculantFgn").field("n", &self.n).finish()
    }
}

/// Autocovariance of unit-spacing fractional Gaussian noise at lag `k`.
pub fn fgn_autocovariance(hurst: f64, k: usize) -> f64 {
    let h2 = 2.0 * hurst;
    let k = k as f64;
    0.5 * ((k + 1.0).powf(h2) - 2.0 * k.powf(h2) + (k - 1.0).abs().powf(h2))
}

impl CirculantFgn {
    pub fn new(hurst: f64, n: usize, dt: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::grid("need at least one increment"));
        }
        let m = 2 * n;
        let mut planner = RealFftPlanner::<f64>::new();
        let forward = planner.plan_fft_forward(m);
        let mut row: Vec<f64> = (0..m)
            .map(|j| fgn_autocovariance(hurst, if j <= n { j } else { m - j }))
            .collect();
        let mut spectrum = forward.make_output_vec();
        forward
            .process(&mut row, &mut spectrum)
            .map_err(|e| Error::KernelInvalid(format!("fft failed: {e}")))?;
        let mut amplitude = Vec::with_capacity(n + 1);
        for (k, c) in spectrum.iter().enumerate() {
            let lambda = c.re;
            if lambda < -EMBEDDING_TOLERANCE {
                return Err(Error::KernelInvalid(format!(
                    "circulant embedding eigenvalue {lambda:e} at frequency {k}"
                )));
            }
            amplitude.push((lambda.max(0.0) / m as f64).sqrt());
        }
        Ok(Self {
            n,
            amplitude,
            fft: planner.plan_fft_inverse(m),
            scale: dt.powf(hurst),
        })
    }

    pub fn sample_increments<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let n = self.n;
        let mut w = self.fft.make_input_vec();
        w[0] = Complex::new(self.amplitude[0] * normal(rng), 0.0);
        let half = std::f64::consts::FRAC_1_SQRT_2;
        for k in 1..n {
            let a = self.amplitude[k] * half;
            w[k] = Complex::new(a * normal(rng), a * normal(rng));
        }
        w[n] = Complex::new(self.amplitude[n] * normal(rng), 0.0);
        let mut out = self.fft.make_output_vec();
        self.fft
            .process(&mut w, &mut out)
            .expect("buffer sizes come from the plan");
        out.truncate(n);
        for x in &mut out {
            *x *= self.scale;
        }
        out
    }
}

/// Dense Cholesky sampler for an arbitrary kernel on an arbitrary point list.
/// Points with zero variance (e.g. the origin) are pinned to zero and left out
/// of the factorization.
#[derive(Debug, Clone)]
pub struct CholeskySampler {
    len: usize,
    active: Vec<usize>,
    lower: DMatrix<f64>,
}

impl CholeskySampler {
    pub fn new<C: Covariance>(kernel: &C, points: &[Vec<f64>]) -> Result<Self> {
        if points.len() > CHOLESKY_MAX_POINTS {
            return Err(Error::config(format!(
                "dense Cholesky limited to {CHOLESKY_MAX_POINTS} points, got {}",
                points.len()
            )));
        }
        let mut active = Vec::new();
        for (i, p) in points.iter().enumerate() {
            if kernel.covariance(p, p)? > 0.0 {
                active.push(i);
            }
        }
        let pts: Vec<Vec<f64>> = active.iter().map(|&i| points[i].clone()).collect();
        let m = raw_kernel_matrix(kernel, &pts)?;
        let lower = factor(m)?;
        Ok(Self {
            len: points.len(),
            active,
            lower,
        })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn sample_with<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let k = self.active.len();
        let z = DVector::from_iterator(k, (0..k).map(|_| normal(rng)));
        let x = &self.lower * z;
        let mut out = vec![0.0; self.len];
        for (j, &i) in self.active.iter().enumerate() {
            out[i] = x[j];
        }
        out
    }
}

fn factor(m: DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = m.nrows();
    if n == 0 {
        return Ok(m);
    }
    if let Some(c) = Cholesky::new(m.clone()) {
        return Ok(c.unpack());
    }
    let jitter = 1e-12 * m.trace() / n as f64;
    let mut jittered = m;
    for i in 0..n {
        jittered[(i, i)] += jitter;
    }
    Cholesky::new(jittered)
        .map(|c| c.unpack())
        .ok_or_else(|| Error::KernelInvalid("covariance matrix is not positive definite".into()))
}

/// One-shot convenience wrapper: builds the sampler and draws one path.
pub fn sample_gaussian_path(kernel: &KernelSpec, grid: Arc<Grid>, seed: SeedSpec) -> Result<PathSample> {
    Ok(GaussianPathSampler::new(kernel, grid)?.sample(seed))
}
