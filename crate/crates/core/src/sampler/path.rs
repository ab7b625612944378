use std::io::Write;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::Grid;
use crate::error::{Error, Result};

/// An exactly recorded jump of a cadlag path. `value` is the path value at
/// `time`, jump included (right-continuous convention).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JumpRecord {
    pub time: f64,
    pub size: f64,
    pub value: f64,
}

impl JumpRecord {
    pub fn left_limit(&self) -> f64 {
        self.value - self.size
    }
}

/// A realized path or field: one value per grid point, plus exact jump
/// records for Lévy paths.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSample {
    pub grid: Arc<Grid>,
    pub values: Vec<f64>,
    pub jumps: Option<Vec<JumpRecord>>,
}

impl PathSample {
    pub fn new(grid: Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::grid(format!(
                "{} values for a grid of {} points",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self {
            grid,
            values,
            jumps: None,
        })
    }

    pub fn with_jumps(mut self, jumps: Vec<JumpRecord>) -> Self {
        self.jumps = Some(jumps);
        self
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    pub fn jumps(&self) -> &[JumpRecord] {
        self.jumps.as_deref().unwrap_or(&[])
    }

    /// Value at the last grid point.
    pub fn terminal(&self) -> f64 {
        *self.values.last().expect("grids are never empty")
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
            && self.jumps().iter().all(|j| j.value.is_finite() && j.size.is_finite())
    }

    /// Value at `t` of a one-parameter path, resolved exactly from the jump
    /// records between grid points when the path is piecewise constant.
    /// For paths with a continuous part this is only exact at grid and jump
    /// times.
    pub fn value_at_time(&self, t: f64) -> f64 {
        let k = self.grid.floor_index(t);
        let mut best_time = self.grid.point(k)[0];
        let mut best = self.values[k];
        for j in self.jumps() {
            if j.time <= t && j.time > best_time {
                best_time = j.time;
                best = j.value;
            }
        }
        best
    }

    /// Writes `t,value` (one-parameter) or `coord_1,...,coord_d,value` rows.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let d = self.dim();
        if d == 1 {
            writeln!(out, "t,value")?;
        } else {
            let cols: Vec<String> = (1..=d).map(|i| format!("coord_{i}")).collect();
            writeln!(out, "{},value", cols.join(","))?;
        }
        for (i, v) in self.values.iter().enumerate() {
            for x in self.grid.point(i) {
                write!(out, "{x},")?;
            }
            writeln!(out, "{v}")?;
        }
        Ok(())
    }

    /// Writes `time,size` rows for the recorded jumps.
    pub fn write_jumps_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "time,size")?;
        for j in self.jumps() {
            writeln!(out, "{},{}", j.time, j.size)?;
        }
        Ok(())
    }
}
