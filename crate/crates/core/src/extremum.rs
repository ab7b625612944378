//! Suprema, argmax brackets and slice projections of sampled paths and fields.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::levy::evaluation_points;
use crate::sampler::PathSample;

pub use crate::levy::DEFAULT_TIE_TOL;

/// Supremum and the coordinate-wise extent of the (tolerance) argmax set.
/// For one-parameter paths the vectors have length one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArgmaxSummary {
    pub sup: f64,
    pub z_left: Vec<f64>,
    pub z_right: Vec<f64>,
    pub argmax_count: usize,
}

impl ArgmaxSummary {
    pub fn dim(&self) -> usize {
        self.z_left.len()
    }

    /// Bracket midpoint, the point estimate of the maximizer.
    pub fn midpoint(&self) -> Vec<f64> {
        self.z_left.iter().zip(&self.z_right).map(|(l, r)| 0.5 * (l + r)).collect()
    }

    pub fn width(&self) -> Vec<f64> {
        self.z_left.iter().zip(&self.z_right).map(|(l, r)| r - l).collect()
    }

    pub fn max_width(&self) -> f64 {
        self.width().into_iter().fold(0.0, f64::max)
    }
}

/// `S` over all evaluation points (grid values plus exact jump values) and
/// the bracket of points within `tie_tol` of it.
pub fn sup_and_argmax(path: &PathSample, tie_tol: f64) -> Result<ArgmaxSummary> {
    if path.values.is_empty() {
        return Err(Error::EmptyPath);
    }
    if !(tie_tol >= 0.0) {
        return Err(Error::domain(format!("tie tolerance must be >= 0, got {tie_tol}")));
    }
    if path.dim() == 1 {
        if path.jumps().is_empty() {
            let grid = &path.grid;
            return Ok(scan_1d(
                path.values.iter().enumerate().map(|(k, &v)| (grid.point(k)[0], v)),
                tie_tol,
            ));
        }
        return Ok(scan_1d(evaluation_points(path).into_iter(), tie_tol));
    }
    Ok(scan_field(path, tie_tol))
}

fn scan_1d<I: Iterator<Item = (f64, f64)> + Clone>(pts: I, tie_tol: f64) -> ArgmaxSummary {
    let sup = pts.clone().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let cut = sup - tie_tol;
    let (mut lo, mut hi, mut count) = (f64::INFINITY, f64::NEG_INFINITY, 0);
    for (t, v) in pts {
        if v >= cut {
            lo = lo.min(t);
            hi = hi.max(t);
            count += 1;
        }
    }
    ArgmaxSummary {
        sup,
        z_left: vec![lo],
        z_right: vec![hi],
        argmax_count: count,
    }
}

fn scan_field(path: &PathSample, tie_tol: f64) -> ArgmaxSummary {
    let d = path.dim();
    let sup = path.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let cut = sup - tie_tol;
    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    let mut count = 0;
    for (i, &v) in path.values.iter().enumerate() {
        if v >= cut {
            for (a, &x) in path.grid.point(i).iter().enumerate() {
                lo[a] = lo[a].min(x);
                hi[a] = hi[a].max(x);
            }
            count += 1;
        }
    }
    ArgmaxSummary {
        sup,
        z_left: lo,
        z_right: hi,
        argmax_count: count,
    }
}

/// `f_i(x)`: the maximum of a field over the slice `{z : z_i = x}`, tabulated
/// at the grid values of coordinate `i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceProjection {
    pub axis: usize,
    pub xs: Vec<f64>,
    pub values: Vec<f64>,
}

impl SliceProjection {
    pub fn sup(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

pub fn slice_max_projection(field: &PathSample, axis: usize) -> Result<SliceProjection> {
    let grid = &field.grid;
    if axis >= grid.dim() {
        return Err(Error::domain(format!(
            "coordinate {axis} out of range for a {}-dimensional field",
            grid.dim()
        )));
    }
    let m = grid.steps(axis);
    let mut values = vec![f64::NEG_INFINITY; m + 1];
    let mut seen = vec![false; m + 1];
    for (i, &v) in field.values.iter().enumerate() {
        let k = grid.lattice(i)[axis] as usize;
        seen[k] = true;
        values[k] = values[k].max(v);
    }
    if let Some(k) = seen.iter().position(|s| !s) {
        return Err(Error::domain(format!(
            "slice z_{axis} = {} contains no grid point",
            grid.axis_value(axis, k)
        )));
    }
    Ok(SliceProjection {
        axis,
        xs: (0..=m).map(|k| grid.axis_value(axis, k)).collect(),
        values,
    })
}

/// Argmax bracket of a field computed coordinate-wise from its slice
/// projections: the tolerance argmax set of `f_i` is exactly the projection
/// of the field's argmax set on coordinate `i`.
pub fn argmax_nd(field: &PathSample, tie_tol: f64) -> Result<ArgmaxSummary> {
    if field.values.is_empty() {
        return Err(Error::EmptyPath);
    }
    if field.dim() == 1 {
        return sup_and_argmax(field, tie_tol);
    }
    let sup = field.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let cut = sup - tie_tol;
    let mut z_left = Vec::with_capacity(field.dim());
    let mut z_right = Vec::with_capacity(field.dim());
    for axis in 0..field.dim() {
        let f = slice_max_projection(field, axis)?;
        debug_assert_eq!(f.sup(), sup);
        let hits: Vec<f64> = f.xs.iter().zip(&f.values).filter(|(_, &v)| v >= cut).map(|(x, _)| *x).collect();
        z_left.push(hits[0]);
        z_right.push(*hits.last().expect("the maximizing slice is always a hit"));
    }
    let argmax_count = field.values.iter().filter(|&&v| v >= cut).count();
    Ok(ArgmaxSummary {
        sup,
        z_left,
        z_right,
        argmax_count,
    })
}

/// Grid-scale uniqueness: every coordinate bracket is at most `delta` wide.
pub fn uniqueness_indicator(summary: &ArgmaxSummary, delta: f64) -> bool {
    summary.width().iter().all(|&w| w <= delta)
}
