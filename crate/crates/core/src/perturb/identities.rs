use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::report::{Battery, Estimand, IdentitySpec};
use super::{perturbed_sup, Profile, Rho};
use crate::error::{Error, Result};
use crate::extremum::{sup_and_argmax, uniqueness_indicator, ArgmaxSummary, DEFAULT_TIE_TOL};
use crate::kernels::{check_monotone_in_first_arg, validate_anchor_conditions, KernelSpec};
use crate::mc::{run_blocks, McAccumulator};
use crate::process::{ProcessSampler, ProcessSpec};
use crate::sampler::{Grid, GridSpec, PathSample, SeedSpec};

/// Central-difference step of the derivative criterion; the Richardson
/// comparison uses half of it.
pub const DEFAULT_STEP: f64 = 0.05;

/// Paired `|z|` above which the steps `h` and `h/2` are flagged as
/// disagreeing.
pub const RICHARDSON_MAX_Z: f64 = 3.0;

/// Runs `n` replicates, each producing one value per label, and wraps the
/// pooled accumulator with the identities to evaluate on it.
pub(crate) fn run_battery<F>(
    experiment: &str,
    grid: &GridSpec,
    labels: Vec<String>,
    identities: Vec<IdentitySpec>,
    n: u64,
    observe: F,
) -> Result<Battery>
where
    F: Fn(u64, &mut Vec<f64>) -> Result<()> + Sync,
{
    if n < 2 {
        return Err(Error::config(format!("need at least 2 replicates, got {n}")));
    }
    let width = labels.len();
    let accumulator = run_blocks(
        n,
        || (McAccumulator::new(labels.iter().cloned()), Vec::with_capacity(width)),
        |(acc, buf), r| {
            buf.clear();
            observe(r, buf)?;
            debug_assert_eq!(buf.len(), width);
            if let Some(x) = buf.iter().find(|x| !x.is_finite()) {
                return Err(Error::domain(format!("non-finite observable {x} in replicate {r}")));
            }
            acc.push(buf);
            Ok(())
        },
        |a, b| a.0.merge(&b.0),
    )?
    .0;
    Ok(Battery {
        experiment: experiment.to_string(),
        grid: grid.clone(),
        accumulator,
        identities,
    })
}

fn uniqueness_delta(grid: &Grid) -> f64 {
    2.0 * (0..grid.dim()).map(|a| grid.spacing(a)).fold(0.0, f64::max)
}

fn summary(path: &PathSample) -> Result<ArgmaxSummary> {
    sup_and_argmax(path, DEFAULT_TIE_TOL)
}

fn anchor_index(grid: &Grid, anchor: &[f64]) -> Result<usize> {
    grid.index_of(anchor)
        .ok_or_else(|| Error::config(format!("anchor {anchor:?} is not a grid point")))
}

fn centered_kernel(process: &ProcessSpec) -> Result<&KernelSpec> {
    match process.kernel() {
        Some(k) if process.is_centered_gaussian() => Ok(k),
        _ => Err(Error::config("the identity needs a centered Gaussian process")),
    }
}

fn suffix(d: usize, i: usize) -> String {
    if d == 1 {
        String::new()
    } else {
        format!("_{}", i + 1)
    }
}

/// `s(a) = E S(X + a rho)` on a table of amplitudes, one path per replicate
/// shared by all amplitudes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SCurve {
    pub a_values: Vec<f64>,
    pub battery: Battery,
    /// Replicates whose `a -> S^a` failed discrete convexity (tolerance 1e-9).
    pub convexity_violations: u64,
}

impl SCurve {
    pub fn label(a: f64) -> String {
        format!("S[a={a}]")
    }

    /// `(a, s_hat(a), se)` rows.
    pub fn table(&self) -> Result<Vec<(f64, f64, f64)>> {
        self.a_values
            .iter()
            .map(|&a| {
                let s = self.battery.statistic(&Self::label(a))?;
                Ok((a, s.mean, s.se))
            })
            .collect()
    }
}

pub fn estimate_s_curve(
    process: &ProcessSpec,
    grid: &GridSpec,
    rho: &Rho,
    a_values: &[f64],
    n: u64,
    seed: u64,
) -> Result<SCurve> {
    if !a_values.contains(&0.0) {
        return Err(Error::config("the amplitude table must include 0"));
    }
    let mut a_sorted = a_values.to_vec();
    a_sorted.sort_by(f64::total_cmp);
    a_sorted.dedup();
    let sampler = ProcessSampler::new(process, grid)?;
    let profile = Profile::axis(sampler.grid(), rho, 0)?;
    let labels: Vec<String> = a_sorted.iter().map(|&a| SCurve::label(a)).collect();
    let violations = std::sync::atomic::AtomicU64::new(0);
    let battery = run_battery("s-curve", grid, labels, Vec::new(), n, |r, out| {
        let path = sampler.sample(SeedSpec::new(seed, r))?;
        for &a in &a_sorted {
            out.push(perturbed_sup(&path, &profile, a)?);
        }
        for k in 1..a_sorted.len().saturating_sub(1) {
            let (a0, a1, a2) = (a_sorted[k - 1], a_sorted[k], a_sorted[k + 1]);
            let left = (out[k] - out[k - 1]) / (a1 - a0);
            let right = (out[k + 1] - out[k]) / (a2 - a1);
            if left > right + 1e-9 * (1.0 + left.abs()) {
                violations.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                break;
            }
        }
        Ok(())
    })?;
    Ok(SCurve {
        a_values: a_sorted,
        battery,
        convexity_violations: violations.into_inner(),
    })
}

/// Central differences of `s` at 0 along each coordinate (steps `h` and
/// `h/2`) against `E rho_i(Z)`, with `Z` the argmax bracket midpoint.
///
/// Identities, per coordinate: `derivative_h`, `derivative_h2`,
/// `richardson` (`h` against `h/2`) and `one_sided` (right against left
/// quotient at `h`). Tracked observables include the bracket widths and the
/// grid-scale uniqueness indicator `unique` (widths at most twice the mesh).
pub fn derivative_criterion_check(
    process: &ProcessSpec,
    grid: &GridSpec,
    rho: &[Rho],
    h: f64,
    n: u64,
    seed: u64,
) -> Result<Battery> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::domain(format!("step must be finite and > 0, got {h}")));
    }
    let sampler = ProcessSampler::new(process, grid)?;
    let g = sampler.grid().clone();
    let d = g.dim();
    if rho.len() != d {
        return Err(Error::config(format!("{} rho for a {d}-dimensional process", rho.len())));
    }
    let profiles = rho
        .iter()
        .enumerate()
        .map(|(i, r)| Profile::axis(&g, r, i))
        .collect::<Result<Vec<_>>>()?;
    let delta = uniqueness_delta(&g);

    let mut labels = vec!["S".to_string(), "unique".to_string()];
    let mut identities = Vec::new();
    for i in 0..d {
        let s = suffix(d, i);
        for l in ["S+h", "S-h", "S+h2", "S-h2", "rho_Z", "Z", "width"] {
            labels.push(format!("{l}{s}"));
        }
        let cd = |step: f64, p: &str, m: &str| {
            Estimand::linear(vec![(format!("{p}{s}"), 0.5 / step), (format!("{m}{s}"), -0.5 / step)])
        };
        let rho_z = Estimand::mean(format!("rho_Z{s}"));
        identities.push(IdentitySpec::new(format!("derivative_h{s}"), cd(h, "S+h", "S-h"), rho_z.clone()));
        identities.push(IdentitySpec::new(format!("derivative_h2{s}"), cd(0.5 * h, "S+h2", "S-h2"), rho_z));
        identities.push(
            IdentitySpec::new(format!("richardson{s}"), cd(h, "S+h", "S-h"), cd(0.5 * h, "S+h2", "S-h2"))
                .with_max_abs_z(RICHARDSON_MAX_Z),
        );
        identities.push(
            IdentitySpec::new(
                format!("one_sided{s}"),
                Estimand::linear(vec![(format!("S+h{s}"), 1.0 / h), ("S".into(), -1.0 / h)]),
                Estimand::linear(vec![("S".into(), 1.0 / h), (format!("S-h{s}"), -1.0 / h)]),
            )
            .diagnostic(),
        );
    }

    run_battery("derivative", grid, labels, identities, n, |r, out| {
        let path = sampler.sample(SeedSpec::new(seed, r))?;
        let sm = summary(&path)?;
        let z = sm.midpoint();
        let w = sm.width();
        out.push(sm.sup);
        out.push(uniqueness_indicator(&sm, delta) as u8 as f64);
        for (i, p) in profiles.iter().enumerate() {
            out.push(perturbed_sup(&path, p, h)?);
            out.push(perturbed_sup(&path, p, -h)?);
            out.push(perturbed_sup(&path, p, 0.5 * h)?);
            out.push(perturbed_sup(&path, p, -0.5 * h)?);
            out.push(rho[i].eval(&z, i));
            out.push(z[i]);
            out.push(w[i]);
        }
        Ok(())
    })
}

/// Closed-form variant of the one-parameter identity for kernels where
/// `R(z, t)` is an explicit function.
enum SpecialForm {
    /// `E(e^{gZ} - e^{-gZ}) = (2g / s^2) e^{gt} Cov(S, X(t))`.
    Ou { gamma: f64, sigma: f64 },
    /// `E(Z^{2H} - (t - Z)^{2H}) = 2 Cov(S, X(t)) - t^{2H}`.
    Fbm { hurst: f64 },
}

/// `E R(Z, t) = Cov(S, X(t))` for a centered one-parameter Gaussian process
/// whose `R(., t)` strictly increases along the grid.
///
/// Identities: `covariance` (generic form) and, for the Ornstein-Uhlenbeck
/// and fractional kernels, `ou_form` / `fbm_form`. Observables include `Z`,
/// `width` and `unique`.
pub fn covariance_identity_1d(process: &ProcessSpec, grid: &GridSpec, t: f64, n: u64, seed: u64) -> Result<Battery> {
    let kernel = centered_kernel(process)?;
    if !kernel.is_one_dimensional() {
        return Err(Error::config("the one-parameter identity needs a one-parameter kernel"));
    }
    let sampler = ProcessSampler::new(process, grid)?;
    let g = sampler.grid().clone();
    let ti = anchor_index(&g, &[t])?;
    let mono = check_monotone_in_first_arg(kernel, &[t], &g.point_list())?;
    if let Some(v) = mono.first_violation {
        return Err(Error::config(format!(
            "R(z, {t}) is not strictly increasing on the grid: R({:?}) = {} then R({:?}) = {}",
            v.z_prev, v.r_prev, v.z_next, v.r_next
        )));
    }
    let special = match *kernel {
        KernelSpec::OrnsteinUhlenbeck { gamma, sigma, .. } => Some(SpecialForm::Ou { gamma, sigma }),
        KernelSpec::FractionalBm { hurst, .. } => Some(SpecialForm::Fbm { hurst }),
        _ => None,
    };
    let delta = uniqueness_delta(&g);

    let mut labels: Vec<String> = ["S", "X_t", "S_X_t", "R_Z_t", "Z", "width", "unique"]
        .map(String::from)
        .to_vec();
    let cov = Estimand::covariance("S", "X_t", "S_X_t");
    let mut identities = vec![IdentitySpec::new("covariance", Estimand::mean("R_Z_t"), cov.clone())];
    match special {
        Some(SpecialForm::Ou { gamma, sigma }) => {
            labels.push("phi_Z".into());
            identities.push(IdentitySpec::new(
                "ou_form",
                Estimand::mean("phi_Z"),
                cov.affine(2.0 * gamma / (sigma * sigma) * (gamma * t).exp(), 0.0),
            ));
        }
        Some(SpecialForm::Fbm { hurst }) => {
            labels.push("phi_Z".into());
            identities.push(IdentitySpec::new(
                "fbm_form",
                Estimand::mean("phi_Z"),
                cov.affine(2.0, -t.powf(2.0 * hurst)),
            ));
        }
        None => {}
    }

    run_battery("identity-1d", grid, labels, identities, n, |r, out| {
        let path = sampler.sample(SeedSpec::new(seed, r))?;
        let sm = summary(&path)?;
        let z = sm.midpoint()[0];
        let xt = path.values[ti];
        out.extend([
            sm.sup,
            xt,
            sm.sup * xt,
            kernel.eval_unchecked(&[z], &[t]),
            z,
            sm.width()[0],
            uniqueness_indicator(&sm, delta) as u8 as f64,
        ]);
        match special {
            Some(SpecialForm::Ou { gamma, .. }) => out.push((gamma * z).exp() - (-gamma * z).exp()),
            Some(SpecialForm::Fbm { hurst }) => {
                out.push(z.powf(2.0 * hurst) - (t - z).max(0.0).powf(2.0 * hurst))
            }
            None => {}
        }
        Ok(())
    })
}

/// `E R(Z_i e^i, t^i) = Cov(S, X(t^i))` per coordinate, after validating the
/// four anchor conditions on the grid.
///
/// Identities `covariance_i`; observables `Z_i`, `width_i` and `unique`.
pub fn covariance_identity_nd(
    process: &ProcessSpec,
    grid: &GridSpec,
    anchors: &[Vec<f64>],
    n: u64,
    seed: u64,
) -> Result<Battery> {
    let kernel = centered_kernel(process)?;
    let sampler = ProcessSampler::new(process, grid)?;
    let g = sampler.grid().clone();
    let d = g.dim();
    if anchors.len() != d {
        return Err(Error::config(format!("{} anchors for a {d}-parameter field", anchors.len())));
    }
    let idx = anchors.iter().map(|a| anchor_index(&g, a)).collect::<Result<Vec<_>>>()?;
    let report = validate_anchor_conditions(kernel, anchors, &g.point_list())?;
    if let Some(f) = report.first_failure() {
        return Err(Error::config(format!(
            "condition ({}) fails: {}{}",
            f.condition,
            f.description,
            f.witness.as_ref().map(|w| format!(" ({w})")).unwrap_or_default()
        )));
    }
    let delta = uniqueness_delta(&g);
    let mut labels = vec!["S".to_string(), "unique".to_string()];
    let mut identities = Vec::new();
    for i in 0..d {
        let s = format!("_{}", i + 1);
        for l in ["X_t", "S_X_t", "R_Z", "Z", "width"] {
            labels.push(format!("{l}{s}"));
        }
        identities.push(IdentitySpec::new(
            format!("covariance{s}"),
            Estimand::mean(format!("R_Z{s}")),
            Estimand::covariance("S", format!("X_t{s}"), format!("S_X_t{s}")),
        ));
    }
    run_battery("identity-nd", grid, labels, identities, n, |r, out| {
        let path = sampler.sample(SeedSpec::new(seed, r))?;
        let sm = summary(&path)?;
        let z = sm.midpoint();
        let w = sm.width();
        out.push(sm.sup);
        out.push(uniqueness_indicator(&sm, delta) as u8 as f64);
        let mut e = vec![0.0; d];
        for i in 0..d {
            let xt = path.values[idx[i]];
            e.iter_mut().for_each(|x| *x = 0.0);
            e[i] = z[i];
            out.extend([xt, sm.sup * xt, kernel.eval_unchecked(&e, &anchors[i]), z[i], w[i]]);
        }
        Ok(())
    })
}

/// A functional `Y` of a sampled path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "functional", rename_all = "snake_case", deny_unknown_fields)]
pub enum Functional {
    Supremum,
    /// Value at the last grid point.
    Terminal,
    /// Trapezoidal integral over a box grid; the average over a simplex grid.
    Integral,
    Point { at: Vec<f64> },
    Constant { value: f64 },
}

enum Bound {
    Supremum,
    Index(usize),
    Weights(Vec<f64>),
    Constant(f64),
}

impl Functional {
    fn bind(&self, grid: &Grid) -> Result<Bound> {
        Ok(match self {
            Functional::Supremum => Bound::Supremum,
            Functional::Terminal => Bound::Index(grid.len() - 1),
            Functional::Point { at } => Bound::Index(anchor_index(grid, at)?),
            Functional::Constant { value } => Bound::Constant(*value),
            Functional::Integral if grid.is_simplex() => Bound::Weights(vec![1.0 / grid.len() as f64; grid.len()]),
            Functional::Integral => {
                let w = (0..grid.len())
                    .map(|i| {
                        grid.lattice(i)
                            .iter()
                            .enumerate()
                            .map(|(a, &k)| {
                                let edge = k == 0 || k as usize == grid.steps(a);
                                grid.spacing(a) * if edge { 0.5 } else { 1.0 }
                            })
                            .product()
                    })
                    .collect();
                Bound::Weights(w)
            }
        })
    }
}

impl Bound {
    /// `Y(X + a phi)`.
    fn eval(&self, values: &[f64], phi: &[f64], a: f64) -> f64 {
        match self {
            Bound::Supremum => values.iter().zip(phi).map(|(x, p)| x + a * p).fold(f64::NEG_INFINITY, f64::max),
            Bound::Index(i) => values[*i] + a * phi[*i],
            Bound::Weights(w) => w.iter().zip(values.iter().zip(phi)).map(|(w, (x, p))| w * (x + a * p)).sum(),
            Bound::Constant(c) => *c,
        }
    }
}

/// Gradient at 0 of `a -> E Y(X + sum_i a_i gamma^i)` by central differences
/// with step `h`, against `Cov(Y, X(t^i)) / sigma_ii`. The directions
/// `gamma^i(z) = R(z, t^i) / sigma_ii` need a diagonal anchor covariance.
///
/// Identities `gradient_i`.
pub fn gaussian_gradient_identity(
    process: &ProcessSpec,
    grid: &GridSpec,
    functional: &Functional,
    anchors: &[Vec<f64>],
    h: f64,
    n: u64,
    seed: u64,
) -> Result<Battery> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::domain(format!("step must be finite and > 0, got {h}")));
    }
    let kernel = centered_kernel(process)?;
    let sampler = ProcessSampler::new(process, grid)?;
    let g: Arc<Grid> = sampler.grid().clone();
    let gammas = crate::bridge::gamma_functions(kernel, anchors)?;
    let idx = anchors.iter().map(|a| anchor_index(&g, a)).collect::<Result<Vec<_>>>()?;
    let y = functional.bind(&g)?;
    let k = anchors.len();
    let profiles: Vec<Profile> = (0..k)
        .map(|i| {
            let section = Rho::KernelSection {
                kernel: kernel.clone(),
                anchor: anchors[i].clone(),
            };
            Profile::from_terms(&g, vec![(section, 0, 1.0 / gammas.variance(i))])
        })
        .collect();

    let mut labels = vec!["Y".to_string()];
    let mut identities = Vec::new();
    for i in 0..k {
        let s = format!("_{}", i + 1);
        for l in ["Y+h", "Y-h", "X_t", "Y_X_t"] {
            labels.push(format!("{l}{s}"));
        }
        identities.push(IdentitySpec::new(
            format!("gradient{s}"),
            Estimand::linear(vec![(format!("Y+h{s}"), 0.5 / h), (format!("Y-h{s}"), -0.5 / h)]),
            Estimand::covariance("Y", format!("X_t{s}"), format!("Y_X_t{s}")).affine(1.0 / gammas.variance(i), 0.0),
        ));
    }
    run_battery("gradient-identity", grid, labels, identities, n, |r, out| {
        let path = sampler.sample(SeedSpec::new(seed, r))?;
        let v = &path.values;
        let base = y.eval(v, profiles.first().map_or(v, |p| p.values()), 0.0);
        out.push(base);
        for (i, p) in profiles.iter().enumerate() {
            let xt = v[idx[i]];
            out.extend([y.eval(v, p.values(), h), y.eval(v, p.values(), -h), xt, base * xt]);
        }
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levy::LevyTriplet;

    fn bm() -> ProcessSpec {
        ProcessSpec::gaussian(KernelSpec::brownian(1.0).unwrap())
    }

    #[test]
    fn s_curve_zero_column_is_plain_sup() {
        let grid = GridSpec::uniform(256, 1.0);
        let c = estimate_s_curve(&bm(), &grid, &Rho::Identity, &[0.1, -0.1, 0.0, 0.05], 200, 3).unwrap();
        assert_eq!(c.convexity_violations, 0);
        assert_eq!(c.a_values, vec![-0.1, 0.0, 0.05, 0.1]);
        let sampler = ProcessSampler::new(&bm(), &grid).unwrap();
        let mean: f64 = (0..200)
            .map(|r| summary(&sampler.sample(SeedSpec::new(3, r)).unwrap()).unwrap().sup)
            .sum::<f64>()
            / 200.0;
        let zero = c.table().unwrap()[1];
        assert_eq!(zero.0, 0.0);
        assert!((zero.1 - mean).abs() < 1e-12);
        assert!(estimate_s_curve(&bm(), &grid, &Rho::Identity, &[0.1], 10, 3).is_err());
    }

    #[test]
    fn pure_drift_derivative_is_exact() {
        let p = ProcessSpec::levy(LevyTriplet::drift(1.0));
        let b = derivative_criterion_check(&p, &GridSpec::uniform(64, 1.0), &[Rho::Identity], 0.05, 16, 1).unwrap();
        for name in ["derivative_h", "derivative_h2"] {
            let r = b.report(name).unwrap();
            assert!((r.lhs - 1.0).abs() < 1e-12);
            assert!((r.rhs - 1.0).abs() < 1e-12);
            assert_eq!(r.z, 0.0);
        }
        assert_eq!(b.statistic("unique").unwrap().mean, 1.0);
    }

    #[test]
    fn bm_identity_small_run() {
        let b = covariance_identity_1d(&bm(), &GridSpec::uniform(512, 1.0), 1.0, 4000, 11).unwrap();
        let r = b.report("covariance").unwrap();
        assert!(r.z.abs() < 4.0, "{r:?}");
        assert!((r.lhs - 0.5).abs() < 5.0 * r.lhs_se);
        assert!(r.lhs_se > 0.0 && r.rhs_se > 0.0);
    }

    #[test]
    fn monotonicity_precondition() {
        let e = covariance_identity_1d(&bm(), &GridSpec::uniform(64, 1.0), 0.5, 100, 1).unwrap_err();
        assert!(matches!(e, Error::Configuration(_)));
        assert!(covariance_identity_1d(&bm(), &GridSpec::uniform(64, 1.0), 0.3333, 100, 1).is_err());
    }

    #[test]
    fn fbm_half_reduces_to_bm() {
        let grid = GridSpec::uniform(128, 1.0);
        let f = ProcessSpec::gaussian(KernelSpec::fbm(0.5, 1.0).unwrap());
        let b = covariance_identity_1d(&f, &grid, 1.0, 500, 5).unwrap();
        let form = b.report("fbm_form").unwrap();
        let plain = b.report("covariance").unwrap();
        // At H = 1/2: E(2Z - 1) = 2 Cov - 1.
        assert!((form.lhs - (2.0 * plain.lhs - 1.0)).abs() < 1e-12);
        assert!((form.rhs - (2.0 * plain.rhs - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn gradient_of_anchor_value_is_one() {
        let grid = GridSpec::uniform(64, 1.0);
        let b = gaussian_gradient_identity(&bm(), &grid, &Functional::Point { at: vec![1.0] }, &[vec![1.0]], 0.05, 300, 2)
            .unwrap();
        let r = b.report("gradient_1").unwrap();
        assert!((r.lhs - 1.0).abs() < 1e-9);
        // The covariance side is a sample variance, exact only in mean.
        assert!((r.rhs - 1.0).abs() < 5.0 * r.rhs_se);
    }

    #[test]
    fn constant_functional_has_zero_gradient() {
        let grid = GridSpec::uniform(64, 1.0);
        let b = gaussian_gradient_identity(&bm(), &grid, &Functional::Constant { value: 3.0 }, &[vec![1.0]], 0.05, 300, 2)
            .unwrap();
        let r = b.report("gradient_1").unwrap();
        assert_eq!(r.lhs, 0.0);
        assert!(r.rhs.abs() < 1e-12);
        assert_eq!(r.z, 0.0);
    }

    #[test]
    fn integral_is_linear() {
        // For a linear functional the identity holds replicate by replicate:
        // lhs is the functional applied to gamma, deterministic.
        let grid = GridSpec::uniform(64, 1.0);
        let b = gaussian_gradient_identity(&bm(), &grid, &Functional::Integral, &[vec![1.0]], 0.05, 300, 2).unwrap();
        let r = b.report("gradient_1").unwrap();
        // Trapezoid of z on [0, 1] is exactly 1/2.
        assert!((r.lhs - 0.5).abs() < 1e-12);
        assert!(r.z.abs() < 4.0);
    }

    #[test]
    fn nd_rejects_non_diagonal_anchors() {
        let p = ProcessSpec::gaussian(KernelSpec::sheet_frontier(vec![1.0, 1.0]).unwrap());
        let grid = GridSpec::product(vec![8, 8], vec![1.0, 1.0]);
        let e = covariance_identity_nd(&p, &grid, &[vec![1.0, 1.0], vec![0.0, 1.0]], 10, 1).unwrap_err();
        assert!(e.to_string().contains("condition (1)"), "{e}");
        covariance_identity_nd(&p, &grid, &[vec![1.0, 0.0], vec![0.0, 1.0]], 10, 1).unwrap();
    }

    #[test]
    fn runs_are_deterministic() {
        let grid = GridSpec::uniform(64, 1.0);
        let a = derivative_criterion_check(&bm(), &grid, &[Rho::Identity], 0.05, 2100, 9).unwrap();
        let b = derivative_criterion_check(&bm(), &grid, &[Rho::Identity], 0.05, 2100, 9).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }
}
