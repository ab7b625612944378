//! Grids, random streams and exact path samplers.

mod field;
mod gaussian;
mod grid;
mod path;
mod seed;

pub use field::{
    additive_stage_paths, additive_value, sample_additive_bm_field, sample_field, sample_linear_field,
    sample_sheet, sample_sheet_with_frontier,
};
pub use gaussian::{
    fgn_autocovariance, sample_gaussian_path, CholeskySampler, CirculantFgn, GaussianPathSampler,
    SamplingMethod, CHOLESKY_MAX_POINTS, EMBEDDING_TOLERANCE,
};
pub(crate) use gaussian::normal;
pub use grid::{Grid, GridSpec};
pub use path::{JumpRecord, PathSample};
pub use seed::{mix64, SeedSpec, StreamRng};

use crate::error::Result;
use crate::kernels::DriftSpec;

/// Adds a deterministic drift to a sampled path, in place of the centered
/// values. Jump records are shifted by the drift at their times.
pub fn add_drift(mut path: PathSample, drift: &DriftSpec) -> Result<PathSample> {
    let f = drift.on_grid(&path.grid)?;
    for (v, d) in path.values.iter_mut().zip(&f) {
        *v += d;
    }
    if let Some(jumps) = path.jumps.as_mut() {
        for j in jumps.iter_mut() {
            j.value += drift.at_time(&path.grid, j.time)?;
        }
    }
    Ok(path)
}
