use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::perturb::{Functional, PerturbationSpec, DEFAULT_STEP};
use crate::process::ProcessSpec;
use crate::sampler::GridSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    #[serde(rename = "identity-1d")]
    Identity1d,
    IdentityNd,
    Derivative,
    LevyCases,
    BridgeCheck,
    GradientIdentity,
    LppGeodesic,
}

impl ExperimentKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ExperimentKind::Identity1d => "identity-1d",
            ExperimentKind::IdentityNd => "identity-nd",
            ExperimentKind::Derivative => "derivative",
            ExperimentKind::LevyCases => "levy-cases",
            ExperimentKind::BridgeCheck => "bridge-check",
            ExperimentKind::GradientIdentity => "gradient-identity",
            ExperimentKind::LppGeodesic => "lpp-geodesic",
        }
    }
}

/// Lower and upper bounds on the mean of one tracked observable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StatisticGate {
    pub battery: String,
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Gates {
    /// Bound on the paired `|z|` of every gated identity.
    #[serde(default = "default_max_z")]
    pub max_abs_z: f64,
    /// Bound for entrywise covariance-matrix comparisons.
    #[serde(default = "default_matrix_z")]
    pub matrix_max_abs_z: f64,
    /// Bound on the relative residual of the bridge reconstruction identity.
    #[serde(default = "default_residual")]
    pub max_relative_residual: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub statistics: Vec<StatisticGate>,
}

fn default_max_z() -> f64 {
    4.0
}

fn default_matrix_z() -> f64 {
    5.0
}

fn default_residual() -> f64 {
    1e-10
}

impl Default for Gates {
    fn default() -> Self {
        Self {
            max_abs_z: default_max_z(),
            matrix_max_abs_z: default_matrix_z(),
            max_relative_residual: default_residual(),
            statistics: Vec::new(),
        }
    }
}

/// Stages and simplex resolution of the last-passage experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LppSpec {
    pub stages: usize,
    pub resolution: usize,
}

fn default_step() -> f64 {
    DEFAULT_STEP
}

/// One experiment, as read from a JSON config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<ExperimentKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub process: Option<ProcessSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
    /// Tilts of the derivative criterion; `rho` is used, `amplitude` only
    /// by `simulate` (to write a perturbed path).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perturbation: Option<PerturbationSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub anchors: Vec<Vec<f64>>,
    pub replicates: u64,
    #[serde(default)]
    pub seed: u64,
    /// Central-difference step.
    #[serde(default = "default_step")]
    pub step: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub functional: Option<Functional>,
    /// Extra grid resolutions for the refinement table.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub refinement: Vec<usize>,
    /// Uniqueness scales of the Lévy cases (default: twice the mesh and 1e-6).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub deltas: Vec<f64>,
    /// Times of the reversal check (default 0.25, 0.5, 0.75 of the horizon).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub reversal_times: Vec<f64>,
    /// Points of the bridge covariance check (default: the whole grid, if
    /// it has at most 16 points).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub points: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lpp: Option<LppSpec>,
    #[serde(default)]
    pub gates: Gates,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(kind: ExperimentKind, replicates: u64, seed: u64) -> Self {
        Self {
            name: None,
            kind: Some(kind),
            process: None,
            grid: None,
            perturbation: None,
            anchors: Vec::new(),
            replicates,
            seed,
            step: DEFAULT_STEP,
            functional: None,
            refinement: Vec::new(),
            deltas: Vec::new(),
            reversal_times: Vec::new(),
            points: Vec::new(),
            lpp: None,
            gates: Gates::default(),
            output: None,
        }
    }

    pub fn with_process(mut self, process: ProcessSpec, grid: GridSpec) -> Self {
        self.process = Some(process);
        self.grid = Some(grid);
        self
    }

    pub fn with_anchors(mut self, anchors: Vec<Vec<f64>>) -> Self {
        self.anchors = anchors;
        self
    }

    /// Parses JSON, reporting the failing field path, line and column.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            Error::Json(format!(
                "at `{path}` (line {}, column {}): {inner}",
                inner.line(),
                inner.column()
            ))
        })
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Json(m) => Error::Json(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn kind(&self) -> Result<ExperimentKind> {
        self.kind.ok_or_else(|| Error::config("missing field `kind`"))
    }

    pub fn display_name(&self) -> String {
        self.name
            .clone()
            .unwrap_or_else(|| self.kind.map_or("experiment", |k| k.as_str()).to_string())
    }

    pub fn process(&self) -> Result<&ProcessSpec> {
        self.process
            .as_ref()
            .ok_or_else(|| Error::config(format!("`{}` needs a `process`", self.display_name())))
    }

    pub fn grid(&self) -> Result<&GridSpec> {
        self.grid
            .as_ref()
            .ok_or_else(|| Error::config(format!("`{}` needs a `grid`", self.display_name())))
    }

    /// Kind-independent checks plus the fields each kind requires.
    pub fn validate(&self) -> Result<()> {
        let kind = self.kind()?;
        if self.replicates < 2 {
            return Err(Error::config(format!("`replicates` must be >= 2, got {}", self.replicates)));
        }
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(Error::config(format!("`step` must be > 0, got {}", self.step)));
        }
        if kind == ExperimentKind::LppGeodesic {
            let lpp = self.lpp.ok_or_else(|| Error::config("`lpp-geodesic` needs `lpp`"))?;
            if !(1..=4).contains(&lpp.stages) || lpp.resolution == 0 {
                return Err(Error::config("`lpp.stages` must be in 1..=4 and `lpp.resolution` >= 1"));
            }
            return Ok(());
        }
        let process = self.process()?;
        let grid = self.grid()?;
        grid.validate()?;
        if grid.dim() != process.dim() {
            return Err(Error::config(format!(
                "{}-dimensional grid for a {}-parameter process",
                grid.dim(),
                process.dim()
            )));
        }
        let built = grid.build()?;
        for a in &self.anchors {
            if built.index_of(a).is_none() {
                return Err(Error::config(format!("anchor {a:?} is not a grid point")));
            }
        }
        let needs_anchors = matches!(
            kind,
            ExperimentKind::IdentityNd | ExperimentKind::BridgeCheck | ExperimentKind::GradientIdentity
        );
        if needs_anchors && self.anchors.is_empty() {
            return Err(Error::config(format!("`{}` needs `anchors`", kind.as_str())));
        }
        match kind {
            ExperimentKind::LevyCases if !matches!(process, ProcessSpec::Levy { .. }) => {
                Err(Error::config("`levy-cases` needs a Lévy process"))
            }
            ExperimentKind::LevyCases | ExperimentKind::Derivative => Ok(()),
            _ if !process.is_centered_gaussian() => Err(Error::config(format!(
                "`{}` needs a centered Gaussian process",
                kind.as_str()
            ))),
            _ => Ok(()),
        }
    }
}
