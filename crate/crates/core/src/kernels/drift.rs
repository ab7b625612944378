use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampler::Grid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Continuity {
    Continuous,
    Cadlag,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum DriftForm {
    Zero,
    /// `f(z) = sum_i slopes[i] * z_i`.
    Linear { slopes: Vec<f64> },
    /// `f(z) = height * 1{z >= at}` (one-parameter domains only).
    Step { at: f64, height: f64 },
    /// One value per grid point, in grid order.
    Tabulated { values: Vec<f64> },
}

/// Deterministic drift `f` added to a centered process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftSpec {
    #[serde(flatten)]
    pub form: DriftForm,
    pub continuity: Continuity,
}

impl DriftSpec {
    pub fn zero() -> Self {
        Self {
            form: DriftForm::Zero,
            continuity: Continuity::Continuous,
        }
    }

    pub fn linear(slopes: Vec<f64>) -> Self {
        Self {
            form: DriftForm::Linear { slopes },
            continuity: Continuity::Continuous,
        }
    }

    pub fn step(at: f64, height: f64) -> Self {
        Self {
            form: DriftForm::Step { at, height },
            continuity: Continuity::Cadlag,
        }
    }

    pub fn tabulated(values: Vec<f64>, continuity: Continuity) -> Self {
        Self {
            form: DriftForm::Tabulated { values },
            continuity,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match &self.form {
            DriftForm::Zero => Ok(()),
            DriftForm::Linear { slopes } => {
                if slopes.iter().all(|s| s.is_finite()) {
                    Ok(())
                } else {
                    Err(Error::domain("linear drift slopes must be finite"))
                }
            }
            DriftForm::Step { at, height } => {
                if !(at.is_finite() && height.is_finite()) {
                    return Err(Error::domain("step drift parameters must be finite"));
                }
                if self.continuity == Continuity::Continuous && *height != 0.0 {
                    return Err(Error::domain("a step drift is cadlag, not continuous"));
                }
                Ok(())
            }
            DriftForm::Tabulated { values } => {
                if values.iter().all(|v| v.is_finite()) {
                    Ok(())
                } else {
                    Err(Error::domain("tabulated drift values must be finite"))
                }
            }
        }
    }

    /// Drift evaluated at every grid point, in grid order.
    pub fn on_grid(&self, grid: &Grid) -> Result<Vec<f64>> {
        self.validate()?;
        match &self.form {
            DriftForm::Tabulated { values } => {
                if values.len() != grid.len() {
                    return Err(Error::grid(format!(
                        "tabulated drift has {} values for a grid of {} points",
                        values.len(),
                        grid.len()
                    )));
                }
                Ok(values.clone())
            }
            _ => (0..grid.len()).map(|i| self.closed_form(grid.point(i))).collect(),
        }
    }

    /// Drift at an arbitrary time of a one-parameter grid. Tabulated drifts are
    /// extended as right-continuous step functions.
    pub fn at_time(&self, grid: &Grid, t: f64) -> Result<f64> {
        match &self.form {
            DriftForm::Tabulated { values } => {
                if values.len() != grid.len() || grid.dim() != 1 {
                    return Err(Error::grid("tabulated drift does not match the grid"));
                }
                Ok(values[grid.floor_index(t)])
            }
            _ => self.closed_form(&[t]),
        }
    }

    fn closed_form(&self, z: &[f64]) -> Result<f64> {
        match &self.form {
            DriftForm::Zero => Ok(0.0),
            DriftForm::Linear { slopes } => {
                if slopes.len() != z.len() {
                    return Err(Error::grid(format!(
                        "linear drift has {} slopes for {}-dimensional points",
                        slopes.len(),
                        z.len()
                    )));
                }
                Ok(slopes.iter().zip(z).map(|(s, x)| s * x).sum())
            }
            DriftForm::Step { at, height } => {
                if z.len() != 1 {
                    return Err(Error::grid("step drift needs a one-parameter domain"));
                }
                Ok(if z[0] >= *at { *height } else { 0.0 })
            }
            DriftForm::Tabulated { .. } => unreachable!("tabulated drift has no closed form"),
        }
    }
}
