use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mc::{standard_normal_cdf, Estimate, McAccumulator};
use crate::sampler::GridSpec;

/// A smooth function of the tracked means, named by observable labels so it
/// can be re-evaluated after accumulators are merged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Estimand {
    /// `offset + sum_k w_k E[x_k]`.
    Linear {
        terms: Vec<(String, f64)>,
        #[serde(default)]
        offset: f64,
    },
    /// `offset + scale * Cov(x, y)`; `xy` must track the product `x * y`.
    Covariance {
        x: String,
        y: String,
        xy: String,
        #[serde(default = "one")]
        scale: f64,
        #[serde(default)]
        offset: f64,
    },
}

fn one() -> f64 {
    1.0
}

impl Estimand {
    pub fn mean(label: impl Into<String>) -> Self {
        Estimand::Linear {
            terms: vec![(label.into(), 1.0)],
            offset: 0.0,
        }
    }

    pub fn linear(terms: Vec<(String, f64)>) -> Self {
        Estimand::Linear { terms, offset: 0.0 }
    }

    pub fn covariance(x: impl Into<String>, y: impl Into<String>, xy: impl Into<String>) -> Self {
        Estimand::Covariance {
            x: x.into(),
            y: y.into(),
            xy: xy.into(),
            scale: 1.0,
            offset: 0.0,
        }
    }

    pub fn affine(self, a: f64, b: f64) -> Self {
        match self {
            Estimand::Linear { terms, offset } => Estimand::Linear {
                terms: terms.into_iter().map(|(l, w)| (l, a * w)).collect(),
                offset: a * offset + b,
            },
            Estimand::Covariance {
                x,
                y,
                xy,
                scale,
                offset,
            } => Estimand::Covariance {
                x,
                y,
                xy,
                scale: a * scale,
                offset: a * offset + b,
            },
        }
    }

    pub fn estimate(&self, acc: &McAccumulator) -> Result<Estimate> {
        match self {
            Estimand::Linear { terms, offset } => {
                let mut e = Estimate::constant(*offset, acc.dim());
                for (label, w) in terms {
                    e = e.add(&acc.mean_of(acc.require(label)?).scale(*w));
                }
                Ok(e)
            }
            Estimand::Covariance {
                x,
                y,
                xy,
                scale,
                offset,
            } => Ok(acc
                .covariance_of(acc.require(x)?, acc.require(y)?, acc.require(xy)?)
                .scale(*scale)
                .offset(*offset)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IdentitySpec {
    pub name: String,
    pub lhs: Estimand,
    pub rhs: Estimand,
    /// Diagnostic identities are reported but never gate a run.
    #[serde(default = "yes")]
    pub gated: bool,
    /// Overrides the experiment-wide `|z|` bound.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_abs_z: Option<f64>,
}

fn yes() -> bool {
    true
}

impl IdentitySpec {
    pub fn new(name: impl Into<String>, lhs: Estimand, rhs: Estimand) -> Self {
        Self {
            name: name.into(),
            lhs,
            rhs,
            gated: true,
            max_abs_z: None,
        }
    }

    pub fn diagnostic(mut self) -> Self {
        self.gated = false;
        self
    }

    pub fn with_max_abs_z(mut self, z: f64) -> Self {
        self.max_abs_z = Some(z);
        self
    }
}

/// Paired comparison of the two sides of an identity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityReport {
    pub name: String,
    pub lhs: f64,
    pub lhs_se: f64,
    pub rhs: f64,
    pub rhs_se: f64,
    /// Estimated covariance of the two estimators (they share replicates).
    pub covariance: f64,
    pub z: f64,
    pub p_value: f64,
    pub n: u64,
    pub grid: GridSpec,
    pub gated: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_abs_z: Option<f64>,
}

impl IdentityReport {
    pub fn csv_row(&self, experiment: &str) -> String {
        format!(
            "{experiment}/{},{},{},{},{},{},{}",
            self.name, self.lhs, self.lhs_se, self.rhs, self.rhs_se, self.z, self.n
        )
    }
}

pub const CSV_HEADER: &str = "experiment,lhs,lhs_se,rhs,rhs_se,z,n";

/// Mean and standard error of one tracked observable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Statistic {
    pub label: String,
    pub mean: f64,
    pub se: f64,
    pub n: u64,
}

/// Everything a Monte Carlo run produced: the raw accumulator plus the
/// identities to evaluate on it. Merging two batteries of the same
/// experiment pools their replicates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Battery {
    pub experiment: String,
    pub grid: GridSpec,
    pub accumulator: McAccumulator,
    pub identities: Vec<IdentitySpec>,
}

impl Battery {
    pub fn reports(&self) -> Result<Vec<IdentityReport>> {
        self.identities.iter().map(|s| self.evaluate(s)).collect()
    }

    pub fn report(&self, name: &str) -> Result<IdentityReport> {
        let spec = self
            .identities
            .iter()
            .find(|s| s.name == name)
            .ok_or_else(|| Error::config(format!("no identity named `{name}`")))?;
        self.evaluate(spec)
    }

    pub fn evaluate(&self, spec: &IdentitySpec) -> Result<IdentityReport> {
        let acc = &self.accumulator;
        let l = spec.lhs.estimate(acc)?;
        let r = spec.rhs.estimate(acc)?;
        let p = acc.paired(&l, &r);
        Ok(IdentityReport {
            name: spec.name.clone(),
            lhs: p.lhs,
            lhs_se: p.lhs_se,
            rhs: p.rhs,
            rhs_se: p.rhs_se,
            covariance: p.covariance,
            z: p.z,
            p_value: 2.0 * (1.0 - standard_normal_cdf(p.z.abs())),
            n: p.n,
            grid: self.grid.clone(),
            gated: spec.gated,
            max_abs_z: spec.max_abs_z,
        })
    }

    pub fn statistic(&self, label: &str) -> Result<Statistic> {
        let i = self.accumulator.require(label)?;
        Ok(Statistic {
            label: label.to_string(),
            mean: self.accumulator.mean[i],
            se: self.accumulator.std_error(i),
            n: self.accumulator.count,
        })
    }

    pub fn statistics(&self) -> Vec<Statistic> {
        self.accumulator
            .labels
            .iter()
            .map(|l| self.statistic(l).expect("label is tracked"))
            .collect()
    }

    pub fn merge(&mut self, other: &Battery) -> Result<()> {
        if self.experiment != other.experiment
            || self.grid != other.grid
            || self.identities != other.identities
            || self.accumulator.labels != other.accumulator.labels
        {
            return Err(Error::config(format!(
                "cannot merge runs of different experiments (`{}` vs `{}`)",
                self.experiment, other.experiment
            )));
        }
        self.accumulator.merge(&other.accumulator);
        Ok(())
    }
}
