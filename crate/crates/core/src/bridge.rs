//! Gaussian bridges pinned to zero at anchor points, the interpolating
//! functions `gamma^i`, and the reconstruction of the free process from a
//! bridge plus independent anchor values.

use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{raw_kernel_matrix, Covariance, KernelSpec, CONDITION_TOLERANCE};
use crate::process::{ProcessSampler, ProcessSpec};
use crate::sampler::{normal, Grid, PathSample, SeedSpec};

/// Pivots `R_{j-1}(t^j, t^j)` at or below this are treated as degenerate.
pub const PIVOT_THRESHOLD: f64 = 1e-12;

/// Sub-stream tags used by the bridge samplers.
const BRIDGE_STREAM: u64 = 0xB1;
const ANCHOR_STREAM: u64 = 0xB2;

/// Anchor points with their covariance matrix and its inverse.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnchorSet {
    pub points: Vec<Vec<f64>>,
    pub sigma: Vec<Vec<f64>>,
    pub sigma_inv: Vec<Vec<f64>>,
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

impl AnchorSet {
    pub fn new<C: Covariance>(kernel: &C, points: Vec<Vec<f64>>) -> Result<Self> {
        for p in &points {
            if p.len() != kernel.dim() {
                return Err(Error::domain(format!(
                    "anchor {p:?} has dimension {}, kernel has {}",
                    p.len(),
                    kernel.dim()
                )));
            }
        }
        let sigma = raw_kernel_matrix(kernel, &points)?;
        let inv = if points.is_empty() {
            sigma.clone()
        } else {
            sigma
                .clone()
                .try_inverse()
                .ok_or_else(|| Error::config("anchor covariance matrix is singular"))?
        };
        Ok(Self {
            points,
            sigma: rows(&sigma),
            sigma_inv: rows(&inv),
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn is_diagonal(&self) -> bool {
        let d = self.len();
        (0..d).all(|i| {
            self.sigma[i][i] > PIVOT_THRESHOLD
                && (0..d).all(|j| {
                    i == j
                        || self.sigma[i][j].abs()
                            <= CONDITION_TOLERANCE * (self.sigma[i][i] * self.sigma[j][j]).sqrt().max(1.0)
                })
        })
    }

    /// Fails unless the anchor covariance is diagonal with positive entries.
    pub fn require_diagonal(&self) -> Result<()> {
        if self.is_diagonal() {
            Ok(())
        } else {
            Err(Error::config(format!(
                "condition (1) fails: the anchor covariance matrix must be invertible and diagonal, got {:?}",
                self.sigma
            )))
        }
    }
}

/// `R_k`: the covariance of the process conditioned to vanish at the first
/// `k` anchors, built by successive rank-one corrections
/// `R_j(u,v) = R_{j-1}(u,v) - R_{j-1}(u,t^j) R_{j-1}(v,t^j) / R_{j-1}(t^j,t^j)`.
#[derive(Debug, Clone)]
pub struct ResidualKernel<C> {
    base: C,
    anchors: Vec<Vec<f64>>,
    /// `pivots[j] = R_j(t^{j+1}, t^{j+1})` (zero-based).
    pivots: Vec<f64>,
    /// `anchor_coef[j][a] = R_j(t^{j+1}, t^a) / pivots[j]`.
    anchor_coef: Vec<Vec<f64>>,
}

impl<C: Covariance> ResidualKernel<C> {
    pub fn new(base: C, anchors: &[Vec<f64>], k: usize) -> Result<Self> {
        if k > anchors.len() {
            return Err(Error::domain(format!("level {k} exceeds the {} anchors", anchors.len())));
        }
        let anchors: Vec<Vec<f64>> = anchors[..k].to_vec();
        let mut table: Vec<Vec<f64>> = Vec::with_capacity(k);
        for a in &anchors {
            let row: Vec<f64> = anchors.iter().map(|b| base.covariance(a, b)).collect::<Result<_>>()?;
            table.push(row);
        }
        // Run the recursion on the anchor block itself: after level j, row a
        // holds R_j(t^a, t^b).
        let mut pivots = Vec::with_capacity(k);
        let mut anchor_coef = Vec::with_capacity(k);
        for j in 0..k {
            let p = table[j][j];
            if !(p > PIVOT_THRESHOLD) {
                return Err(Error::DegenerateAnchor {
                    index: j + 1,
                    pivot: p,
                    threshold: PIVOT_THRESHOLD,
                });
            }
            let coef: Vec<f64> = (0..k).map(|a| table[j][a] / p).collect();
            for row in table.iter_mut() {
                let x = row[j];
                for b in 0..k {
                    row[b] -= x * coef[b];
                }
            }
            pivots.push(p);
            anchor_coef.push(coef);
        }
        Ok(Self {
            base,
            anchors,
            pivots,
            anchor_coef,
        })
    }

    pub fn level(&self) -> usize {
        self.anchors.len()
    }

    pub fn pivots(&self) -> &[f64] {
        &self.pivots
    }

    pub fn base(&self) -> &C {
        &self.base
    }

    /// `s_j(u) = R_{j-1}(u, t^j)` for `j = 1..=k`: the section of `u`
    /// against each anchor at the level where it is conditioned on.
    pub fn section(&self, u: &[f64]) -> Result<Vec<f64>> {
        let k = self.level();
        let mut r: Vec<f64> = self.anchors.iter().map(|t| self.base.covariance(u, t)).collect::<Result<_>>()?;
        let mut out = Vec::with_capacity(k);
        for j in 0..k {
            out.push(r[j]);
            let x = r[j];
            for a in j + 1..k {
                r[a] -= x * self.anchor_coef[j][a];
            }
        }
        Ok(out)
    }

    /// Regression coefficients `c_j(u) = R_{j-1}(u, t^j) / R_{j-1}(t^j, t^j)`.
    /// At an anchor, `c_j(t^j) = 1` and `c_i(t^j) = 0` for `i > j`, exactly.
    pub fn coefficients(&self, u: &[f64]) -> Result<Vec<f64>> {
        let mut out: Vec<f64> = self
            .section(u)?
            .iter()
            .zip(&self.pivots)
            .map(|(s, p)| s / p)
            .collect();
        // At anchor t^i the later sections vanish identically; pin them so
        // conditioned paths are exactly zero there, not zero up to rounding.
        if let Some(i) = self.anchors.iter().position(|t| t.as_slice() == u) {
            out[i] = 1.0;
            for c in &mut out[i + 1..] {
                *c = 0.0;
            }
        }
        Ok(out)
    }

    /// `R_k(u, v)` from precomputed sections of `u` and `v`.
    pub fn from_sections(&self, r_uv: f64, su: &[f64], sv: &[f64]) -> f64 {
        r_uv - su.iter().zip(sv).zip(&self.pivots).map(|((a, b), p)| a * b / p).sum::<f64>()
    }
}

impl<C: Covariance> Covariance for ResidualKernel<C> {
    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn covariance(&self, u: &[f64], v: &[f64]) -> Result<f64> {
        let r = self.base.covariance(u, v)?;
        if self.level() == 0 {
            return Ok(r);
        }
        let su = self.section(u)?;
        let sv = self.section(v)?;
        Ok(self.from_sections(r, &su, &sv))
    }
}

pub fn residual_kernel(base: &KernelSpec, anchors: &[Vec<f64>], k: usize) -> Result<ResidualKernel<KernelSpec>> {
    ResidualKernel::new(base.clone(), anchors, k)
}

/// `gamma^i(z) = R(z, t^i) / R(t^i, t^i)` for a diagonal anchor set.
#[derive(Debug, Clone)]
pub struct GammaFunctions {
    kernel: KernelSpec,
    anchors: AnchorSet,
}

impl GammaFunctions {
    pub fn anchors(&self) -> &AnchorSet {
        &self.anchors
    }

    pub fn len(&self) -> usize {
        self.anchors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.anchors.is_empty()
    }

    pub fn variance(&self, i: usize) -> f64 {
        self.anchors.sigma[i][i]
    }

    pub fn eval(&self, i: usize, z: &[f64]) -> Result<f64> {
        Ok(self.kernel.covariance(z, &self.anchors.points[i])? / self.variance(i))
    }

    pub fn eval_all(&self, z: &[f64]) -> Result<Vec<f64>> {
        (0..self.len()).map(|i| self.eval(i, z)).collect()
    }
}

pub fn gamma_functions(base: &KernelSpec, anchors: &[Vec<f64>]) -> Result<GammaFunctions> {
    base.validate()?;
    let set = AnchorSet::new(base, anchors.to_vec())?;
    set.require_diagonal()?;
    Ok(GammaFunctions {
        kernel: base.clone(),
        anchors: set,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovGammaReport {
    pub max_abs_residual: f64,
    pub max_abs_kernel: f64,
    pub relative_residual: f64,
    pub pairs: usize,
}

/// Largest `|R(z,v) - R_d(z,v) - sum_j gamma^j(z) gamma^j(v) R(t^j,t^j)|`
/// over all pairs of `points`.
pub fn covgamma_check(base: &KernelSpec, anchors: &[Vec<f64>], points: &[Vec<f64>]) -> Result<CovGammaReport> {
    let gamma = gamma_functions(base, anchors)?;
    let residual = residual_kernel(base, anchors, anchors.len())?;
    let sections: Vec<Vec<f64>> = points.iter().map(|p| residual.section(p)).collect::<Result<_>>()?;
    let gammas: Vec<Vec<f64>> = points.iter().map(|p| gamma.eval_all(p)).collect::<Result<_>>()?;
    let (mut worst, mut scale) = (0.0f64, 0.0f64);
    for (i, u) in points.iter().enumerate() {
        for (j, v) in points.iter().enumerate() {
            let r = base.covariance(u, v)?;
            let rd = residual.from_sections(r, &sections[i], &sections[j]);
            let low_rank: f64 = (0..gamma.len()).map(|a| gammas[i][a] * gammas[j][a] * gamma.variance(a)).sum();
            worst = worst.max((r - rd - low_rank).abs());
            scale = scale.max(r.abs());
        }
    }
    Ok(CovGammaReport {
        max_abs_residual: worst,
        max_abs_kernel: scale,
        relative_residual: if scale > 0.0 { worst / scale } else { worst },
        pairs: points.len() * points.len(),
    })
}

fn anchor_indices(grid: &Grid, anchors: &[Vec<f64>]) -> Result<Vec<usize>> {
    anchors
        .iter()
        .map(|t| {
            grid.index_of(t)
                .ok_or_else(|| Error::grid(format!("anchor {t:?} is not a grid point")))
        })
        .collect()
}

/// Pins a sampled path to zero at the anchors: level by level,
/// `X^k(z) = X^{k-1}(z) - c_k(z) X^{k-1}(t^k)`.
pub fn condition_path(
    residual: &ResidualKernel<KernelSpec>,
    anchor_idx: &[usize],
    coefficients: &[Vec<f64>],
    path: &mut PathSample,
) {
    for (j, &idx) in anchor_idx.iter().enumerate() {
        let pin = path.values[idx];
        for (v, c) in path.values.iter_mut().zip(coefficients) {
            *v -= c[j] * pin;
        }
    }
    debug_assert_eq!(residual.level(), anchor_idx.len());
}

/// Reusable sampler for bridges and reconstructions on one grid.
pub struct BridgeSampler {
    sampler: ProcessSampler,
    residual: ResidualKernel<KernelSpec>,
    anchor_idx: Vec<usize>,
    coefficients: Vec<Vec<f64>>,
    gamma_values: Option<Vec<Vec<f64>>>,
    gamma: Option<GammaFunctions>,
}

impl BridgeSampler {
    pub fn new(base: &KernelSpec, anchors: &[Vec<f64>], grid: Arc<Grid>) -> Result<Self> {
        let sampler = ProcessSampler::on_grid(&ProcessSpec::gaussian(base.clone()), grid.clone())?;
        let anchor_idx = anchor_indices(&grid, anchors)?;
        let mut sorted = anchor_idx.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != anchor_idx.len() {
            return Err(Error::domain("anchors must be distinct"));
        }
        let residual = residual_kernel(base, anchors, anchors.len())?;
        let coefficients: Vec<Vec<f64>> =
            (0..grid.len()).map(|i| residual.coefficients(grid.point(i))).collect::<Result<_>>()?;
        let gamma = gamma_functions(base, anchors).ok();
        let gamma_values = match &gamma {
            Some(g) => Some((0..grid.len()).map(|i| g.eval_all(grid.point(i))).collect::<Result<_>>()?),
            None => None,
        };
        Ok(Self {
            sampler,
            residual,
            anchor_idx,
            coefficients,
            gamma_values,
            gamma,
        })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.sampler.grid()
    }

    pub fn residual(&self) -> &ResidualKernel<KernelSpec> {
        &self.residual
    }

    pub fn bridge(&self, seed: SeedSpec) -> Result<PathSample> {
        let key = SeedSpec::new(SeedSpec::derive_seed(seed.key(), BRIDGE_STREAM), seed.replicate);
        let mut path = self.sampler.sample(key)?;
        condition_path(&self.residual, &self.anchor_idx, &self.coefficients, &mut path);
        Ok(path)
    }

    /// Bridge plus `sum_i gamma^i(z) N_i` with independent
    /// `N_i ~ N(0, R(t^i, t^i))`.
    pub fn reconstruct(&self, seed: SeedSpec) -> Result<PathSample> {
        let (gamma, values) = match (&self.gamma, &self.gamma_values) {
            (Some(g), Some(v)) => (g, v),
            _ => {
                return Err(Error::config(
                    "condition (1) fails: reconstruction needs an invertible diagonal anchor covariance",
                ))
            }
        };
        let mut path = self.bridge(seed)?;
        let mut rng = seed.substream(ANCHOR_STREAM);
        let n: Vec<f64> = (0..gamma.len()).map(|i| gamma.variance(i).sqrt() * normal(&mut rng)).collect();
        for (v, g) in path.values.iter_mut().zip(values) {
            *v += g.iter().zip(&n).map(|(a, b)| a * b).sum::<f64>();
        }
        Ok(path)
    }
}

pub fn sample_conditioned_path(
    base: &KernelSpec,
    anchors: &[Vec<f64>],
    grid: Arc<Grid>,
    seed: SeedSpec,
) -> Result<PathSample> {
    BridgeSampler::new(base, anchors, grid)?.bridge(seed)
}

pub fn reconstruct_from_bridge(
    base: &KernelSpec,
    anchors: &[Vec<f64>],
    grid: Arc<Grid>,
    seed: SeedSpec,
) -> Result<PathSample> {
    gamma_functions(base, anchors)?;
    BridgeSampler::new(base, anchors, grid)?.reconstruct(seed)
}
