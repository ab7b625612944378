//! A process description bound to a grid, ready to draw replicates.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{DriftSpec, KernelSpec};
use crate::levy::{sample_levy_path, LevyTriplet};
use crate::sampler::{add_drift, sample_field, GaussianPathSampler, Grid, GridSpec, PathSample, SeedSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProcessSpec {
    Gaussian {
        kernel: KernelSpec,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        drift: Option<DriftSpec>,
    },
    Levy { triplet: LevyTriplet },
}

impl ProcessSpec {
    pub fn gaussian(kernel: KernelSpec) -> Self {
        ProcessSpec::Gaussian { kernel, drift: None }
    }

    pub fn levy(triplet: LevyTriplet) -> Self {
        ProcessSpec::Levy { triplet }
    }

    pub fn kernel(&self) -> Option<&KernelSpec> {
        match self {
            ProcessSpec::Gaussian { kernel, .. } => Some(kernel),
            ProcessSpec::Levy { .. } => None,
        }
    }

    /// Whether the process is centered Gaussian, as the covariance
    /// identities require.
    pub fn is_centered_gaussian(&self) -> bool {
        match self {
            ProcessSpec::Gaussian { drift, .. } => drift.as_ref().is_none_or(|d| d == &DriftSpec::zero()),
            ProcessSpec::Levy { .. } => false,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            ProcessSpec::Gaussian { kernel, .. } => kernel.dim(),
            ProcessSpec::Levy { .. } => 1,
        }
    }
}

enum Engine {
    Path(GaussianPathSampler),
    Field(KernelSpec),
    Levy(LevyTriplet),
}

/// Draws independent replicates of a process on a fixed grid. All set-up
/// (factorizations, spectra) happens once in [`ProcessSampler::new`].
pub struct ProcessSampler {
    grid: Arc<Grid>,
    engine: Engine,
    drift: Option<DriftSpec>,
}

impl ProcessSampler {
    pub fn new(spec: &ProcessSpec, grid: &GridSpec) -> Result<Self> {
        Self::on_grid(spec, Arc::new(grid.build()?))
    }

    pub fn on_grid(spec: &ProcessSpec, grid: Arc<Grid>) -> Result<Self> {
        if grid.dim() != spec.dim() {
            return Err(Error::grid(format!(
                "{}-dimensional grid for a {}-parameter process",
                grid.dim(),
                spec.dim()
            )));
        }
        let (engine, drift) = match spec {
            ProcessSpec::Gaussian { kernel, drift } => {
                let engine = if kernel.is_one_dimensional() {
                    Engine::Path(GaussianPathSampler::new(kernel, grid.clone())?)
                } else {
                    kernel.validate()?;
                    Engine::Field(kernel.clone())
                };
                if let Some(d) = drift {
                    d.on_grid(&grid)?;
                }
                (engine, drift.clone())
            }
            ProcessSpec::Levy { triplet } => {
                triplet.validate()?;
                if !matches!(grid.spec(), GridSpec::Uniform { .. }) {
                    return Err(Error::grid("Lévy paths need a uniform one-parameter grid"));
                }
                (Engine::Levy(*triplet), None)
            }
        };
        Ok(Self { grid, engine, drift })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn sample(&self, seed: SeedSpec) -> Result<PathSample> {
        let path = match &self.engine {
            Engine::Path(s) => s.sample(seed),
            Engine::Field(k) => sample_field(k, self.grid.clone(), seed)?,
            Engine::Levy(t) => sample_levy_path(t, self.grid.clone(), seed)?,
        };
        match &self.drift {
            Some(d) => add_drift(path, d),
            None => Ok(path),
        }
    }
}
