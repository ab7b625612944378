//! Multiparameter Gaussian fields sampled by their linear structure rather
//! than a dense factorization.

use std::sync::Arc;

use rand::Rng;

use super::gaussian::normal;
use super::{Grid, GridSpec, PathSample, SeedSpec};
use crate::error::{Error, Result};
use crate::kernels::KernelSpec;

fn product_shape(grid: &Grid, horizon: &[f64]) -> Result<Vec<usize>> {
    let n = match grid.spec() {
        GridSpec::Product { n, .. } => n.clone(),
        GridSpec::Uniform { n, .. } => vec![*n],
        GridSpec::Simplex { .. } => return Err(Error::grid("this field needs a product grid")),
    };
    if n.len() != horizon.len() {
        return Err(Error::grid(format!(
            "{}-dimensional grid for a {}-parameter field",
            n.len(),
            horizon.len()
        )));
    }
    for (a, &t) in horizon.iter().enumerate() {
        if grid.horizon(a) > t * (1.0 + 1e-12) {
            return Err(Error::domain(format!(
                "grid horizon {} on axis {a} exceeds the field horizon {t}",
                grid.horizon(a)
            )));
        }
    }
    Ok(n)
}

/// Brownian sheet on a product grid: independent cell masses with variance
/// equal to the cell volume, summed along every axis.
fn sheet_values<R: Rng + ?Sized>(grid: &Grid, shape: &[usize], rng: &mut R) -> Vec<f64> {
    let d = shape.len();
    let len = grid.len();
    let sd = (0..d).map(|a| grid.spacing(a)).product::<f64>().sqrt();
    let mut b = vec![0.0; len];
    for (i, v) in b.iter_mut().enumerate() {
        if grid.lattice(i).iter().all(|&k| k > 0) {
            *v = sd * normal(rng);
        }
    }
    let mut stride = 1;
    for a in (0..d).rev() {
        for i in 0..len {
            if grid.lattice(i)[a] > 0 {
                b[i] += b[i - stride];
            }
        }
        stride *= shape[a] + 1;
    }
    b
}

fn brownian_walk<R: Rng + ?Sized>(n: usize, dt: f64, rng: &mut R) -> Vec<f64> {
    let sd = dt.sqrt();
    let mut w = Vec::with_capacity(n + 1);
    let mut x = 0.0;
    w.push(0.0);
    for _ in 0..n {
        x += sd * normal(rng);
        w.push(x);
    }
    w
}

/// Brownian sheet plus independent Brownian motions along the axes,
/// `X(z) = B(z) + sum_i W^i(z_i)`.
pub fn sample_sheet_with_frontier(horizon: &[f64], grid: Arc<Grid>, seed: SeedSpec) -> Result<PathSample> {
    let shape = product_shape(&grid, horizon)?;
    let mut rng = seed.rng();
    let mut values = sheet_values(&grid, &shape, &mut rng);
    let walks: Vec<Vec<f64>> = (0..shape.len())
        .map(|a| brownian_walk(shape[a], grid.spacing(a), &mut rng))
        .collect();
    for (i, v) in values.iter_mut().enumerate() {
        for (a, &k) in grid.lattice(i).iter().enumerate() {
            *v += walks[a][k as usize];
        }
    }
    PathSample::new(grid, values)
}

pub fn sample_sheet(horizon: &[f64], grid: Arc<Grid>, seed: SeedSpec) -> Result<PathSample> {
    let shape = product_shape(&grid, horizon)?;
    let values = sheet_values(&grid, &shape, &mut seed.rng());
    PathSample::new(grid, values)
}

/// `X(z) = sum_i z_i xi_i` with independent standard normals.
pub fn sample_linear_field(horizon: &[f64], grid: Arc<Grid>, seed: SeedSpec) -> Result<PathSample> {
    product_shape(&grid, horizon)?;
    let mut rng = seed.rng();
    let xi: Vec<f64> = (0..horizon.len()).map(|_| normal(&mut rng)).collect();
    let values = (0..grid.len())
        .map(|i| grid.point(i).iter().zip(&xi).map(|(z, x)| z * x).sum())
        .collect();
    PathSample::new(grid, values)
}

/// The `stages + 1` independent Brownian motions behind an additive field,
/// each on `[0, 1]` at resolution `1/m`.
pub fn additive_stage_paths(stages: usize, m: usize, seed: SeedSpec) -> Vec<Vec<f64>> {
    let mut rng = seed.rng();
    let dt = 1.0 / m as f64;
    (0..=stages).map(|_| brownian_walk(m, dt, &mut rng)).collect()
}

/// Value of the additive field at lattice point `l` given its stage paths:
/// stage `i` contributes `B^(i)(q_{i+1}) - B^(i)(q_i)` with `q` the partial
/// sums of `l` and `q_{stages+1} = m`.
pub fn additive_value(paths: &[Vec<f64>], lattice: &[u32]) -> f64 {
    let m = paths[0].len() - 1;
    let mut q = 0usize;
    let mut x = 0.0;
    for (i, path) in paths.iter().enumerate() {
        let next = if i < lattice.len() {
            q + lattice[i] as usize
        } else {
            m
        };
        x += path[next] - path[q];
        q = next;
    }
    x
}

/// Additive Brownian motion on the simplex grid of the same dimension.
pub fn sample_additive_bm_field(stages: usize, grid: Arc<Grid>, seed: SeedSpec) -> Result<PathSample> {
    let m = match grid.spec() {
        GridSpec::Simplex { dim, resolution } if *dim == stages => *resolution,
        _ => {
            return Err(Error::grid(format!(
                "additive field with {stages} stages needs a {stages}-dimensional simplex grid"
            )))
        }
    };
    let paths = additive_stage_paths(stages, m, seed);
    let values = (0..grid.len()).map(|i| additive_value(&paths, grid.lattice(i))).collect();
    PathSample::new(grid, values)
}

/// Dispatches a multiparameter kernel to its field sampler.
pub fn sample_field(kernel: &KernelSpec, grid: Arc<Grid>, seed: SeedSpec) -> Result<PathSample> {
    match kernel {
        KernelSpec::BrownianSheetFrontier { horizon } => sample_sheet_with_frontier(horizon, grid, seed),
        KernelSpec::BrownianSheet { horizon } => sample_sheet(horizon, grid, seed),
        KernelSpec::LinearCov { horizon } => sample_linear_field(horizon, grid, seed),
        KernelSpec::AdditiveBm { stages } => sample_additive_bm_field(*stages, grid, seed),
        other => Err(Error::config(format!(
            "{} is a one-parameter kernel",
            other.family_name()
        ))),
    }
}
