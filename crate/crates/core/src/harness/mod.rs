//! Experiment configs, the Monte Carlo battery runner, reports and gates.

mod config;
mod experiments;

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::perturb::{Battery, IdentityReport, Statistic, CSV_HEADER};

pub use config::{ExperimentConfig, ExperimentKind, Gates, LppSpec, StatisticGate};
pub use experiments::{bridge_battery, levy_case_battery, lpp_geodesic_experiment, reversal_battery};

/// A deterministic check with a fixed bound, such as an algebraic residual.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateResult {
    pub name: String,
    pub value: f64,
    pub bound: String,
    pub passed: bool,
}

/// One row of the grid-refinement table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinementRow {
    pub n: usize,
    pub mean_z: f64,
    pub mean_z_se: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub z: f64,
    pub mean_width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatteryReport {
    pub experiment: String,
    pub identities: Vec<IdentityReport>,
    pub statistics: Vec<Statistic>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub experiment: String,
    pub kind: ExperimentKind,
    pub config: ExperimentConfig,
    /// Hypotheses validated before sampling.
    pub preconditions: Vec<String>,
    pub results: Vec<BatteryReport>,
    /// Grid-scale uniqueness frequencies (`unique*` observables).
    pub uniqueness: Vec<Statistic>,
    /// Mean argmax bracket widths (`width*` observables).
    pub bracket_widths: Vec<Statistic>,
    pub refinement: Vec<RefinementRow>,
    pub checks: Vec<Check>,
    pub gates: Vec<GateResult>,
    pub passed: bool,
    /// Raw accumulators; `report-merge` pools these.
    pub batteries: Vec<Battery>,
    pub wall_clock_seconds: f64,
}

/// What an experiment produced before gating.
pub(crate) struct Outcome {
    pub preconditions: Vec<String>,
    pub batteries: Vec<Battery>,
    pub checks: Vec<Check>,
    pub refinement_tags: Vec<(usize, String)>,
    pub default_gates: Vec<StatisticGate>,
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<Report> {
    config.validate()?;
    let start = Instant::now();
    let outcome = experiments::run(config)?;
    let mut report = assemble(config, outcome.preconditions, outcome.batteries, outcome.checks, &outcome.refinement_tags, &outcome.default_gates)?;
    report.wall_clock_seconds = start.elapsed().as_secs_f64();
    Ok(report)
}

fn assemble(
    config: &ExperimentConfig,
    preconditions: Vec<String>,
    batteries: Vec<Battery>,
    checks: Vec<Check>,
    refinement_tags: &[(usize, String)],
    default_gates: &[StatisticGate],
) -> Result<Report> {
    let kind = config.kind()?;
    let mut results = Vec::new();
    let (mut uniqueness, mut widths) = (Vec::new(), Vec::new());
    for b in &batteries {
        let stats = b.statistics();
        for s in &stats {
            let tagged = Statistic {
                label: format!("{}/{}", b.experiment, s.label),
                ..s.clone()
            };
            if s.label.starts_with("unique") {
                uniqueness.push(tagged);
            } else if s.label.starts_with("width") {
                widths.push(tagged);
            }
        }
        results.push(BatteryReport {
            experiment: b.experiment.clone(),
            identities: b.reports()?,
            statistics: stats,
        });
    }

    let mut refinement = Vec::new();
    for (n, tag) in refinement_tags {
        let b = batteries
            .iter()
            .find(|b| &b.experiment == tag)
            .ok_or_else(|| Error::config(format!("missing refinement run `{tag}`")))?;
        let z = b.statistic("Z")?;
        let id = b.report("covariance")?;
        refinement.push(RefinementRow {
            n: *n,
            mean_z: z.mean,
            mean_z_se: z.se,
            lhs: id.lhs,
            rhs: id.rhs,
            z: id.z,
            mean_width: b.statistic("width")?.mean,
        });
    }

    let gates = evaluate_gates(config, &batteries, &results, &checks, default_gates)?;
    let passed = gates.iter().all(|g| g.passed);
    Ok(Report {
        experiment: config.display_name(),
        kind,
        config: config.clone(),
        preconditions,
        results,
        uniqueness,
        bracket_widths: widths,
        refinement,
        checks,
        gates,
        passed,
        batteries,
        wall_clock_seconds: 0.0,
    })
}

fn evaluate_gates(
    config: &ExperimentConfig,
    batteries: &[Battery],
    results: &[BatteryReport],
    checks: &[Check],
    default_gates: &[StatisticGate],
) -> Result<Vec<GateResult>> {
    let mut gates = Vec::new();
    for r in results {
        for id in r.identities.iter().filter(|i| i.gated) {
            let bound = id.max_abs_z.unwrap_or(config.gates.max_abs_z);
            gates.push(GateResult {
                name: format!("{}/{}", r.experiment, id.name),
                value: id.z,
                bound: format!("|z| < {bound}"),
                passed: id.z.abs() < bound,
            });
        }
    }
    for c in checks {
        gates.push(GateResult {
            name: c.name.clone(),
            value: c.value,
            bound: format!("<= {:e}", c.bound),
            passed: c.value <= c.bound,
        });
    }
    for g in default_gates.iter().chain(&config.gates.statistics) {
        let b = batteries
            .iter()
            .find(|b| b.experiment == g.battery)
            .ok_or_else(|| Error::config(format!("gate refers to unknown battery `{}`", g.battery)))?;
        let s = b.statistic(&g.label)?;
        let ok = g.min.is_none_or(|m| s.mean >= m) && g.max.is_none_or(|m| s.mean <= m);
        let bound = match (g.min, g.max) {
            (Some(a), Some(b)) => format!("in [{a}, {b}]"),
            (Some(a), None) => format!(">= {a}"),
            (None, Some(b)) => format!("<= {b}"),
            (None, None) => "any".into(),
        };
        gates.push(GateResult {
            name: format!("{}/{}", g.battery, g.label),
            value: s.mean,
            bound,
            passed: ok,
        });
    }
    Ok(gates)
}

impl Report {
    /// `experiment,lhs,lhs_se,rhs,rhs_se,z,n` rows for every identity.
    pub fn csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.results {
            for id in &r.identities {
                out.push_str(&id.csv_row(&r.experiment));
                out.push('\n');
            }
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Writes `report.json` and `tables.csv` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("report.json"), self.to_json()?)?;
        let mut f = std::fs::File::create(dir.join("tables.csv"))?;
        f.write_all(self.csv().as_bytes())?;
        Ok(())
    }

    /// Pools the replicates of runs of one experiment (typically with
    /// disjoint seeds) and re-evaluates identities and gates.
    pub fn merge(reports: &[Report]) -> Result<Report> {
        let (first, rest) = reports
            .split_first()
            .ok_or_else(|| Error::config("nothing to merge"))?;
        let mut batteries = first.batteries.clone();
        for r in rest {
            if r.kind != first.kind || r.batteries.len() != batteries.len() || r.checks != first.checks {
                return Err(Error::config(format!(
                    "cannot merge `{}` with `{}`: different experiments",
                    first.experiment, r.experiment
                )));
            }
            for (b, o) in batteries.iter_mut().zip(&r.batteries) {
                b.merge(o)?;
            }
        }
        let mut config = first.config.clone();
        config.replicates = batteries.first().map_or(0, |b| b.accumulator.count);
        let tags: Vec<(usize, String)> = first
            .refinement
            .iter()
            .filter_map(|row| {
                batteries
                    .iter()
                    .find(|b| b.experiment == experiments::refinement_tag(row.n))
                    .map(|b| (row.n, b.experiment.clone()))
            })
            .collect();
        let defaults = experiments::default_gates(&config, &batteries);
        let mut merged = assemble(&config, first.preconditions.clone(), batteries, first.checks.clone(), &tags, &defaults)?;
        merged.experiment = first.experiment.clone();
        merged.wall_clock_seconds = reports.iter().map(|r| r.wall_clock_seconds).sum();
        Ok(merged)
    }

    /// Reads a report, pulling only the fields needed for merging so that
    /// non-finite z-scores (written as `null`) do not get in the way.
    pub fn read_for_merge(path: &Path) -> Result<Report> {
        let text = std::fs::read_to_string(path)?;
        let v: serde_json::Value = serde_json::from_str(&text)?;
        let field = |k: &str| {
            v.get(k)
                .cloned()
                .ok_or_else(|| Error::Json(format!("{}: missing `{k}`", path.display())))
        };
        let config: ExperimentConfig = serde_json::from_value(field("config")?)?;
        let batteries: Vec<Battery> = serde_json::from_value(field("batteries")?)?;
        let checks: Vec<Check> = serde_json::from_value(field("checks")?)?;
        let refinement: Vec<RefinementRow> = serde_json::from_value(field("refinement")?)
            .unwrap_or_default();
        let preconditions: Vec<String> = serde_json::from_value(field("preconditions")?)?;
        let experiment: String = serde_json::from_value(field("experiment")?)?;
        let wall: f64 = serde_json::from_value(field("wall_clock_seconds")?).unwrap_or(0.0);
        let kind = config.kind()?;
        Ok(Report {
            experiment,
            kind,
            config,
            preconditions,
            results: Vec::new(),
            uniqueness: Vec::new(),
            bracket_widths: Vec::new(),
            refinement,
            checks,
            gates: Vec::new(),
            passed: false,
            batteries,
            wall_clock_seconds: wall,
        })
    }
}
