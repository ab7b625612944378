use std::sync::Arc;

use super::config::{ExperimentConfig, ExperimentKind, StatisticGate};
use super::{run_experiment, Check, Outcome, Report};
use crate::bridge::{covgamma_check, residual_kernel, AnchorSet, BridgeSampler};
use crate::error::{Error, Result};
use crate::extremum::{sup_and_argmax, uniqueness_indicator, DEFAULT_TIE_TOL};
use crate::kernels::{validate_anchor_conditions, Covariance, KernelSpec};
use crate::levy::{exit_time_from_zero, first_argmax_time, reverse_path, sample_levy_path, LevyTriplet};
use crate::perturb::{
    covariance_identity_1d, covariance_identity_nd, derivative_criterion_check, gaussian_gradient_identity,
    run_battery, Battery, Estimand, Functional, IdentitySpec, Rho,
};
use crate::process::ProcessSpec;
use crate::sampler::{Grid, GridSpec, SeedSpec};

/// Largest grid on which the reconstruction residual is checked over all
/// pairs; bigger grids are thinned to 64 evenly spaced points.
const COVGAMMA_MAX_POINTS: usize = 4096;
/// Absolute bound of the anchored-to-zero check.
const ANCHOR_ZERO_BOUND: f64 = 1e-12;

pub(crate) fn refinement_tag(n: usize) -> String {
    format!("identity-1d[n={n}]")
}

fn unique_label(delta: f64) -> String {
    format!("unique@{delta}")
}

fn levy_deltas(config: &ExperimentConfig, grid: &Grid) -> Vec<f64> {
    if config.deltas.is_empty() {
        vec![2.0 * grid.spacing(0), 1e-6]
    } else {
        config.deltas.clone()
    }
}

/// Gates implied by the experiment itself (on top of the identity gates):
/// the Lévy case analysis and the last-passage uniqueness frequency.
pub(crate) fn default_gates(config: &ExperimentConfig, batteries: &[Battery]) -> Vec<StatisticGate> {
    let gate = |battery: &str, label: String, min: Option<f64>, max: Option<f64>| StatisticGate {
        battery: battery.into(),
        label,
        min,
        max,
    };
    match config.kind {
        Some(ExperimentKind::LevyCases) => {
            let (Some(ProcessSpec::Levy { triplet }), Some(grid)) = (&config.process, &config.grid) else {
                return Vec::new();
            };
            let Ok(grid) = grid.build() else { return Vec::new() };
            let deltas = levy_deltas(config, &grid);
            let coarse = unique_label(deltas[0]);
            let finest = unique_label(deltas.iter().copied().fold(f64::INFINITY, f64::min));
            let case = "levy-cases";
            if triplet.sigma > 0.0 || triplet.c < 0.0 {
                vec![gate(case, coarse, Some(0.99), None)]
            } else if triplet.c > 0.0 {
                vec![gate(case, "at_horizon".into(), Some(1.0), None)]
            } else if triplet.rate > 0.0 {
                vec![
                    gate(case, "tau_zero".into(), None, Some(0.0)),
                    gate(case, finest, None, Some(0.0)),
                ]
            } else {
                Vec::new()
            }
        }
        Some(ExperimentKind::LppGeodesic) if batteries.iter().any(|b| b.experiment == "lpp-geodesic") => {
            vec![gate("lpp-geodesic", "unique".into(), Some(0.99), None)]
        }
        _ => Vec::new(),
    }
}

pub(crate) fn run(config: &ExperimentConfig) -> Result<Outcome> {
    let kind = config.kind()?;
    let (n, seed) = (config.replicates, config.seed);
    let mut out = Outcome {
        preconditions: Vec::new(),
        batteries: Vec::new(),
        checks: Vec::new(),
        refinement_tags: Vec::new(),
        default_gates: Vec::new(),
    };
    match kind {
        ExperimentKind::Identity1d => {
            let (process, grid) = (config.process()?, config.grid()?);
            let t = match config.anchors.first() {
                Some(a) => a[0],
                None => grid.build()?.horizon(0),
            };
            out.batteries.push(covariance_identity_1d(process, grid, t, n, seed)?);
            out.preconditions.push(format!("R(z, {t}) is strictly increasing in z on the grid"));
            for &m in &config.refinement {
                let g = grid.with_resolution(m);
                let mut b = covariance_identity_1d(process, &g, t, n, SeedSpec::derive_seed(seed, m as u64))?;
                b.experiment = refinement_tag(m);
                out.batteries.push(b);
                out.refinement_tags.push((m, refinement_tag(m)));
            }
        }
        ExperimentKind::IdentityNd => {
            let (process, grid) = (config.process()?, config.grid()?);
            out.batteries.push(covariance_identity_nd(process, grid, &config.anchors, n, seed)?);
            out.preconditions.extend(anchor_conditions(process, grid, &config.anchors)?);
        }
        ExperimentKind::Derivative => {
            let (process, grid) = (config.process()?, config.grid()?);
            let rho = match &config.perturbation {
                Some(p) => p.rho.clone(),
                None => vec![Rho::Identity; process.dim()],
            };
            out.batteries.push(derivative_criterion_check(process, grid, &rho, config.step, n, seed)?);
            out.preconditions.push("every rho_i is strictly increasing on the grid".into());
        }
        ExperimentKind::GradientIdentity => {
            let (process, grid) = (config.process()?, config.grid()?);
            let f = config.functional.clone().unwrap_or(Functional::Supremum);
            out.batteries.push(gaussian_gradient_identity(process, grid, &f, &config.anchors, config.step, n, seed)?);
            out.preconditions.push("anchor covariance matrix is invertible and diagonal".into());
        }
        ExperimentKind::LevyCases => {
            let grid = Arc::new(config.grid()?.build()?);
            let ProcessSpec::Levy { triplet } = config.process()? else {
                return Err(Error::config("`levy-cases` needs a Lévy process"));
            };
            let deltas = levy_deltas(config, &grid);
            out.preconditions.push(levy_case_name(triplet).into());
            out.batteries.push(levy_case_battery(triplet, grid.clone(), &deltas, n, seed)?);
            let h = grid.horizon(0);
            let times = if config.reversal_times.is_empty() {
                vec![0.25 * h, 0.5 * h, 0.75 * h]
            } else {
                config.reversal_times.clone()
            };
            out.batteries.push(reversal_battery(triplet, grid, &times, n, SeedSpec::derive_seed(seed, 0x5E))?);
        }
        ExperimentKind::BridgeCheck => {
            let process = config.process()?;
            let kernel = process.kernel().ok_or_else(|| Error::config("`bridge-check` needs a Gaussian kernel"))?;
            let grid = Arc::new(config.grid()?.build()?);
            let set = AnchorSet::new(kernel, config.anchors.clone())?;
            set.require_diagonal()?;
            out.preconditions.push("anchor covariance matrix is invertible and diagonal".into());
            out.preconditions.push("every conditioning pivot exceeds 1e-12".into());
            out.checks.extend(bridge_checks(kernel, &config.anchors, &grid, config.gates.max_relative_residual)?);
            let points = if config.points.is_empty() {
                default_points(&grid)
            } else {
                config.points.clone()
            };
            let z = config.gates.matrix_max_abs_z;
            let (bridge, recon) = bridge_battery(kernel, &config.anchors, grid, &points, n, seed, z)?;
            out.batteries.push(bridge);
            out.batteries.push(recon);
        }
        ExperimentKind::LppGeodesic => {
            let lpp = config.lpp.ok_or_else(|| Error::config("`lpp-geodesic` needs `lpp`"))?;
            let kernel = KernelSpec::additive(lpp.stages)?;
            let grid = GridSpec::simplex(lpp.stages, lpp.resolution);
            let anchors: Vec<Vec<f64>> = (0..lpp.stages)
                .map(|j| (0..lpp.stages).map(|i| if i == j { 1.0 } else { 0.0 }).collect())
                .collect();
            let process = ProcessSpec::gaussian(kernel);
            let mut b = covariance_identity_nd(&process, &grid, &anchors, n, seed)?;
            b.experiment = "lpp-geodesic".into();
            if lpp.stages == 1 {
                b.identities.push(IdentitySpec::new(
                    "swap_symmetry",
                    Estimand::mean("Z_1"),
                    Estimand::Linear {
                        terms: Vec::new(),
                        offset: 0.5,
                    },
                ));
            }
            for j in 1..lpp.stages {
                b.identities.push(IdentitySpec::new(
                    format!("exchange_{}_{}", j, j + 1),
                    Estimand::mean(format!("Z_{j}")),
                    Estimand::mean(format!("Z_{}", j + 1)),
                ));
            }
            out.preconditions.extend(anchor_conditions(&process, &grid, &anchors)?);
            out.batteries.push(b);
        }
    }
    out.default_gates = default_gates(config, &out.batteries);
    Ok(out)
}

fn anchor_conditions(process: &ProcessSpec, grid: &GridSpec, anchors: &[Vec<f64>]) -> Result<Vec<String>> {
    let kernel = process.kernel().ok_or_else(|| Error::config("needs a Gaussian kernel"))?;
    let g = grid.build()?;
    let report = validate_anchor_conditions(kernel, anchors, &g.point_list())?;
    Ok(report
        .conditions
        .iter()
        .map(|c| format!("condition ({}) holds: {}", c.condition, c.description))
        .collect())
}

fn levy_case_name(t: &LevyTriplet) -> &'static str {
    if t.sigma > 0.0 {
        "case 1: sigma > 0, the argmax is unique"
    } else if t.c > 0.0 {
        "case 2: sigma = 0, c > 0, the argmax is the horizon"
    } else if t.c < 0.0 {
        "case 2: sigma = 0, c < 0, the argmax is the first argmax time L"
    } else {
        "case 3: sigma = 0, c = 0, uniqueness has the probability of an immediate exit"
    }
}

/// Per-replicate Lévy diagnostics: `S`, `L`, the argmax bracket, whether
/// the argmax is the horizon, the exit time from zero, and uniqueness
/// indicators at each `delta`.
pub fn levy_case_battery(triplet: &LevyTriplet, grid: Arc<Grid>, deltas: &[f64], n: u64, seed: u64) -> Result<Battery> {
    if deltas.is_empty() || deltas.iter().any(|d| !(*d > 0.0)) {
        return Err(Error::config("uniqueness scales must be > 0"));
    }
    let horizon = grid.horizon(0);
    let mut labels: Vec<String> = ["S", "L", "Z_left", "Z_right", "width", "at_horizon", "tau_zero", "tau_finite", "jumps"]
        .map(String::from)
        .to_vec();
    labels.extend(deltas.iter().map(|&d| unique_label(d)));
    run_battery("levy-cases", grid.spec(), labels, Vec::new(), n, |r, out| {
        let path = sample_levy_path(triplet, grid.clone(), SeedSpec::new(seed, r))?;
        let sm = sup_and_argmax(&path, DEFAULT_TIE_TOL)?;
        let tau = exit_time_from_zero(&path, DEFAULT_TIE_TOL);
        out.extend([
            sm.sup,
            first_argmax_time(&path, DEFAULT_TIE_TOL),
            sm.z_left[0],
            sm.z_right[0],
            sm.width()[0],
            (sm.z_left[0] == horizon) as u8 as f64,
            (tau <= 0.0) as u8 as f64,
            tau.is_finite() as u8 as f64,
            path.jumps().len() as f64,
        ]);
        out.extend(deltas.iter().map(|&d| uniqueness_indicator(&sm, d) as u8 as f64));
        Ok(())
    })
}

/// Compares the reversed path `X~(s) = X((T - s)-) - X(T)` with `X(s)` at
/// the given grid times. `X~` has the law of `-X`: the means are compared
/// with a sign flip (`mean@s`), the variances directly (`variance@s`).
pub fn reversal_battery(triplet: &LevyTriplet, grid: Arc<Grid>, times: &[f64], n: u64, seed: u64) -> Result<Battery> {
    let idx = times
        .iter()
        .map(|&s| grid.index_of(&[s]).ok_or_else(|| Error::config(format!("reversal time {s} is not a grid point"))))
        .collect::<Result<Vec<_>>>()?;
    let mut labels = Vec::new();
    let mut identities = Vec::new();
    for &s in times {
        for l in ["X", "X2", "Xrev", "Xrev2"] {
            labels.push(format!("{l}@{s}"));
        }
        identities.push(IdentitySpec::new(
            format!("mean@{s}"),
            Estimand::mean(format!("Xrev@{s}")),
            Estimand::mean(format!("X@{s}")).affine(-1.0, 0.0),
        ));
        identities.push(IdentitySpec::new(
            format!("variance@{s}"),
            Estimand::covariance(format!("Xrev@{s}"), format!("Xrev@{s}"), format!("Xrev2@{s}")),
            Estimand::covariance(format!("X@{s}"), format!("X@{s}"), format!("X2@{s}")),
        ));
    }
    run_battery("reversal", grid.spec(), labels, identities, n, |r, out| {
        let path = sample_levy_path(triplet, grid.clone(), SeedSpec::new(seed, r))?;
        let rev = reverse_path(&path)?;
        for &k in &idx {
            let (x, y) = (path.values[k], rev.values[k]);
            out.extend([x, x * x, y, y * y]);
        }
        Ok(())
    })
}

fn default_points(grid: &Grid) -> Vec<Vec<f64>> {
    let len = grid.len();
    if len <= 16 {
        return grid.point_list();
    }
    let mut idx: Vec<usize> = (0..=8).map(|k| (k * (len - 1) + 4) / 8).collect();
    idx.dedup();
    idx.into_iter().map(|i| grid.point(i).to_vec()).collect()
}

fn bridge_checks(kernel: &KernelSpec, anchors: &[Vec<f64>], grid: &Grid, bound: f64) -> Result<Vec<Check>> {
    let points = if grid.len() <= COVGAMMA_MAX_POINTS {
        grid.point_list()
    } else {
        (0..64).map(|k| grid.point(k * (grid.len() - 1) / 63).to_vec()).collect()
    };
    let cg = covgamma_check(kernel, anchors, &points)?;
    let residual = residual_kernel(kernel, anchors, anchors.len())?;
    let mut zero = 0.0f64;
    for t in anchors {
        for p in &points {
            zero = zero.max(residual.covariance(t, p)?.abs());
        }
    }
    Ok(vec![
        Check {
            name: "bridge/reconstruction_residual".into(),
            value: cg.relative_residual,
            bound,
        },
        Check {
            name: "bridge/anchored_to_zero".into(),
            value: zero,
            bound: ANCHOR_ZERO_BOUND,
        },
    ])
}

/// Sample covariances of conditioned paths (`bridge`) and of
/// reconstructions (`reconstruction`) at `points`, entry by entry against
/// the residual and the base kernel.
pub fn bridge_battery(
    kernel: &KernelSpec,
    anchors: &[Vec<f64>],
    grid: Arc<Grid>,
    points: &[Vec<f64>],
    n: u64,
    seed: u64,
    max_abs_z: f64,
) -> Result<(Battery, Battery)> {
    let idx = points
        .iter()
        .map(|p| grid.index_of(p).ok_or_else(|| Error::config(format!("point {p:?} is not a grid point"))))
        .collect::<Result<Vec<_>>>()?;
    let sampler = BridgeSampler::new(kernel, anchors, grid.clone())?;
    let k = points.len();
    let mut labels: Vec<String> = (0..k).map(|i| format!("v{i}")).collect();
    for i in 0..k {
        for j in i..k {
            labels.push(format!("v{i}*v{j}"));
        }
    }
    let matrix = |target: &dyn Fn(&[f64], &[f64]) -> Result<f64>| -> Result<Vec<IdentitySpec>> {
        let mut ids = Vec::new();
        for i in 0..k {
            for j in i..k {
                ids.push(
                    IdentitySpec::new(
                        format!("cov[{i},{j}]"),
                        Estimand::covariance(format!("v{i}"), format!("v{j}"), format!("v{i}*v{j}")),
                        Estimand::Linear {
                            terms: Vec::new(),
                            offset: target(&points[i], &points[j])?,
                        },
                    )
                    .with_max_abs_z(max_abs_z),
                );
            }
        }
        Ok(ids)
    };
    let residual = sampler.residual();
    let bridge_ids = matrix(&|u, v| residual.covariance(u, v))?;
    let recon_ids = matrix(&|u, v| kernel.covariance(u, v))?;
    let observe = |values: &[f64], out: &mut Vec<f64>| {
        let x: Vec<f64> = idx.iter().map(|&i| values[i]).collect();
        out.extend_from_slice(&x);
        for i in 0..k {
            for j in i..k {
                out.push(x[i] * x[j]);
            }
        }
    };
    let spec = grid.spec();
    let bridge = run_battery("bridge", spec, labels.clone(), bridge_ids, n, |r, out| {
        observe(&sampler.bridge(SeedSpec::new(seed, r))?.values, out);
        Ok(())
    })?;
    let recon = run_battery("reconstruction", spec, labels, recon_ids, n, |r, out| {
        observe(&sampler.reconstruct(SeedSpec::new(seed, r))?.values, out);
        Ok(())
    })?;
    Ok((bridge, recon))
}

/// Last-passage percolation through `stages + 1` Brownian motions: the
/// additive field on the simplex, its argmax (the geodesic's stage lengths)
/// and the per-stage identities, plus symmetry checks of the mean lengths.
pub fn lpp_geodesic_experiment(stages: usize, resolution: usize, n: u64, seed: u64) -> Result<Report> {
    let mut config = ExperimentConfig::new(ExperimentKind::LppGeodesic, n, seed);
    config.lpp = Some(super::LppSpec { stages, resolution });
    run_experiment(&config)
}
