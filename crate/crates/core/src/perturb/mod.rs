//! Perturbation families `X^a = X + sum_i a_i rho_i`, difference quotients of
//! the supremum, and Monte Carlo checkers for the argmax identities.

mod identities;
mod report;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extremum::{sup_and_argmax, ArgmaxSummary, DEFAULT_TIE_TOL};
use crate::kernels::KernelSpec;
use crate::sampler::{Grid, PathSample};

pub use identities::{
    covariance_identity_1d, covariance_identity_nd, derivative_criterion_check, estimate_s_curve,
    gaussian_gradient_identity, Functional, SCurve, DEFAULT_STEP, RICHARDSON_MAX_Z,
};
pub(crate) use identities::run_battery;
pub use report::{Battery, Estimand, IdentityReport, IdentitySpec, Statistic, CSV_HEADER};

/// Absolute tolerance of the path-wise bracketing inequalities.
pub const BRACKET_TOLERANCE: f64 = 1e-9;

/// A strictly increasing tilt `rho`, applied along one coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rho", rename_all = "snake_case", deny_unknown_fields)]
pub enum Rho {
    Identity,
    /// `e^{gamma z} - e^{-gamma z}`.
    ExpCombination { gamma: f64 },
    /// `z^exponent` on `z >= 0`.
    Power { exponent: f64 },
    /// `z -> R(z, anchor)`.
    KernelSection { kernel: KernelSpec, anchor: Vec<f64> },
    /// `slope * z + intercept`.
    Affine { slope: f64, intercept: f64 },
}

impl Rho {
    pub fn validate(&self) -> Result<()> {
        match self {
            Rho::Identity => Ok(()),
            Rho::ExpCombination { gamma } if gamma.is_finite() && *gamma > 0.0 => Ok(()),
            Rho::ExpCombination { gamma } => Err(Error::domain(format!("exp-combination needs gamma > 0, got {gamma}"))),
            Rho::Power { exponent } if exponent.is_finite() && *exponent > 0.0 => Ok(()),
            Rho::Power { exponent } => Err(Error::domain(format!("power needs exponent > 0, got {exponent}"))),
            Rho::KernelSection { kernel, anchor } => {
                kernel.validate()?;
                if anchor.len() != kernel.dim() || !kernel.contains(anchor) {
                    return Err(Error::domain(format!("anchor {anchor:?} outside the kernel domain")));
                }
                Ok(())
            }
            Rho::Affine { slope, intercept } if slope.is_finite() && *slope > 0.0 && intercept.is_finite() => Ok(()),
            Rho::Affine { slope, .. } => Err(Error::domain(format!("affine needs a finite slope > 0, got {slope}"))),
        }
    }

    /// `rho(z_axis)`. A kernel section is evaluated at the full point `z`.
    pub fn eval(&self, z: &[f64], axis: usize) -> f64 {
        let x = z[axis];
        match self {
            Rho::Identity => x,
            Rho::ExpCombination { gamma } => (gamma * x).exp() - (-gamma * x).exp(),
            Rho::Power { exponent } => x.max(0.0).powf(*exponent),
            Rho::KernelSection { kernel, anchor } => kernel.eval_unchecked(z, anchor),
            Rho::Affine { slope, intercept } => slope * x + intercept,
        }
    }

    pub fn eval_scalar(&self, x: f64) -> f64 {
        self.eval(&[x], 0)
    }

    /// Checks that `rho` is defined and strictly increasing along `axis` of
    /// the grid (at the points `x e^axis`).
    pub fn check_on_grid(&self, grid: &Grid, axis: usize) -> Result<()> {
        self.validate()?;
        if axis >= grid.dim() {
            return Err(Error::grid(format!("axis {axis} on a {}-dimensional grid", grid.dim())));
        }
        let d = grid.dim();
        if let Rho::KernelSection { kernel, .. } = self {
            if kernel.dim() != d {
                return Err(Error::grid(format!(
                    "kernel section of a {}-parameter kernel on a {d}-dimensional grid",
                    kernel.dim()
                )));
            }
        }
        let mut z = vec![0.0; d];
        let mut prev = f64::NEG_INFINITY;
        for k in 0..=grid.steps(axis) {
            z[axis] = grid.axis_value(axis, k);
            if let Rho::KernelSection { kernel, .. } = self {
                if !kernel.contains(&z) {
                    return Err(Error::domain(format!("rho undefined at {z:?}")));
                }
            }
            let r = self.eval(&z, axis);
            if !r.is_finite() || !(r > prev) {
                return Err(Error::domain(format!(
                    "rho is not strictly increasing on axis {axis}: {prev} then {r} at {}",
                    z[axis]
                )));
            }
            prev = r;
        }
        Ok(())
    }
}

/// One `rho_i` per coordinate and the amplitude vector `a`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationSpec {
    pub rho: Vec<Rho>,
    pub amplitude: Vec<f64>,
}

impl PerturbationSpec {
    pub fn new(rho: Vec<Rho>, amplitude: Vec<f64>) -> Self {
        Self { rho, amplitude }
    }

    pub fn identity(dim: usize) -> Self {
        Self::new(vec![Rho::Identity; dim], vec![0.0; dim])
    }

    pub fn validate(&self, grid: &Grid) -> Result<()> {
        if self.rho.len() != grid.dim() || self.amplitude.len() != grid.dim() {
            return Err(Error::grid(format!(
                "{} rho and {} amplitudes for a {}-dimensional grid",
                self.rho.len(),
                self.amplitude.len(),
                grid.dim()
            )));
        }
        if let Some(a) = self.amplitude.iter().find(|a| !a.is_finite()) {
            return Err(Error::domain(format!("amplitude must be finite, got {a}")));
        }
        for (i, r) in self.rho.iter().enumerate() {
            r.check_on_grid(grid, i)?;
        }
        Ok(())
    }
}

/// A tilt `phi = sum_k w_k rho_k(z_{axis_k})` tabulated on the grid, with the
/// formula kept for evaluation at jump times.
#[derive(Debug, Clone)]
pub struct Profile {
    values: Vec<f64>,
    terms: Vec<(Rho, usize, f64)>,
}

impl Profile {
    /// `rho` along `axis`, validated on the grid.
    pub fn axis(grid: &Grid, rho: &Rho, axis: usize) -> Result<Self> {
        rho.check_on_grid(grid, axis)?;
        Ok(Self::from_terms(grid, vec![(rho.clone(), axis, 1.0)]))
    }

    /// `sum_i a_i rho_i`.
    pub fn combined(grid: &Grid, spec: &PerturbationSpec) -> Result<Self> {
        spec.validate(grid)?;
        let terms = spec
            .rho
            .iter()
            .zip(&spec.amplitude)
            .enumerate()
            .map(|(i, (r, &a))| (r.clone(), i, a))
            .collect();
        Ok(Self::from_terms(grid, terms))
    }

    /// Unvalidated weighted sum; used for directions that need not be
    /// monotone (such as the bridge functions `gamma^i`).
    pub fn from_terms(grid: &Grid, terms: Vec<(Rho, usize, f64)>) -> Self {
        let values = (0..grid.len())
            .map(|i| {
                let z = grid.point(i);
                terms.iter().map(|(r, a, w)| w * r.eval(z, *a)).sum()
            })
            .collect();
        Self { values, terms }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn at_point(&self, z: &[f64]) -> f64 {
        self.terms.iter().map(|(r, a, w)| w * r.eval(z, *a)).sum()
    }

    fn check(&self, path: &PathSample) -> Result<()> {
        if self.values.len() != path.values.len() {
            return Err(Error::grid(format!(
                "profile has {} points, path has {}",
                self.values.len(),
                path.values.len()
            )));
        }
        Ok(())
    }
}

/// `X + a * phi`, with jump records shifted consistently.
pub fn tilt(path: &PathSample, profile: &Profile, a: f64) -> Result<PathSample> {
    profile.check(path)?;
    let values = path.values.iter().zip(&profile.values).map(|(x, p)| x + a * p).collect();
    let out = PathSample::new(path.grid.clone(), values)?;
    Ok(match &path.jumps {
        Some(jumps) => {
            let mut jumps = jumps.clone();
            for j in &mut jumps {
                j.value += a * profile.at_point(&[j.time]);
            }
            out.with_jumps(jumps)
        }
        None => out,
    })
}

pub fn perturb_path(path: &PathSample, spec: &PerturbationSpec) -> Result<PathSample> {
    let profile = Profile::combined(&path.grid, spec)?;
    tilt(path, &profile, 1.0)
}

/// `S(X + a phi)` without materializing the tilted path.
pub fn perturbed_sup(path: &PathSample, profile: &Profile, a: f64) -> Result<f64> {
    profile.check(path)?;
    let mut s = path
        .values
        .iter()
        .zip(&profile.values)
        .map(|(x, p)| x + a * p)
        .fold(f64::NEG_INFINITY, f64::max);
    for j in path.jumps() {
        s = s.max(j.value + a * profile.at_point(&[j.time]));
    }
    if s.is_nan() {
        return Err(Error::domain("supremum is NaN"));
    }
    Ok(s)
}

/// Supremum and argmax bracket of `X + a phi`.
pub fn perturbed_summary(path: &PathSample, profile: &Profile, a: f64, tie_tol: f64) -> Result<ArgmaxSummary> {
    if a == 0.0 {
        return sup_and_argmax(path, tie_tol);
    }
    sup_and_argmax(&tilt(path, profile, a)?, tie_tol)
}

/// `(S(X^a) - S(X)) / a` on a single realization, for a one-parameter path.
pub fn difference_quotient(path: &PathSample, a: f64, rho: &Rho) -> Result<f64> {
    if a == 0.0 || !a.is_finite() {
        return Err(Error::domain(format!("amplitude must be finite and nonzero, got {a}")));
    }
    let profile = Profile::axis(&path.grid, rho, 0)?;
    let s = perturbed_sup(path, &profile, 0.0)?;
    Ok((perturbed_sup(path, &profile, a)? - s) / a)
}

/// The path-wise inequalities relating `S`, `S^a` and the argmax brackets of
/// `X` and `X^a`, with every violated inequality listed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BracketingReport {
    pub a: f64,
    pub sup: f64,
    pub sup_a: f64,
    pub z_left: f64,
    pub z_right: f64,
    pub z_left_a: f64,
    pub z_right_a: f64,
    pub quotient: f64,
    pub violations: Vec<String>,
}

impl BracketingReport {
    pub fn holds(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks, to [`BRACKET_TOLERANCE`]:
/// `S + a rho(Z_j) <= S^a <= S + a rho(Z_j^a)` for `j` in `{l, r}`, and the
/// sandwich `rho(Z_l^a) - rho(Z_l) <= (S^a - S)/a - rho(Z_l) <= 0` for `a < 0`
/// (`0 <= (S^a - S)/a - rho(Z_r) <= rho(Z_r^a) - rho(Z_r)` for `a > 0`).
pub fn check_bracketing(path: &PathSample, a: f64, rho: &Rho) -> Result<BracketingReport> {
    if path.dim() != 1 {
        return Err(Error::grid("bracketing inequalities need a one-parameter path"));
    }
    if a == 0.0 || !a.is_finite() {
        return Err(Error::domain(format!("amplitude must be finite and nonzero, got {a}")));
    }
    let profile = Profile::axis(&path.grid, rho, 0)?;
    let base = perturbed_summary(path, &profile, 0.0, DEFAULT_TIE_TOL)?;
    let tilted = perturbed_summary(path, &profile, a, DEFAULT_TIE_TOL)?;
    let r = |t: f64| rho.eval_scalar(t);
    let (s, sa) = (base.sup, tilted.sup);
    let (zl, zr, zla, zra) = (base.z_left[0], base.z_right[0], tilted.z_left[0], tilted.z_right[0]);
    let q = (sa - s) / a;
    let tol = BRACKET_TOLERANCE;
    let mut violations = Vec::new();
    let mut le = |lhs: f64, rhs: f64, what: &str| {
        if !(lhs <= rhs + tol) {
            violations.push(format!("{what}: {lhs} > {rhs}"));
        }
    };
    for (name, z, za) in [("l", zl, zla), ("r", zr, zra)] {
        le(s + a * r(z), sa, &format!("S + a rho(Z_{name}) <= S^a"));
        le(sa, s + a * r(za), &format!("S^a <= S + a rho(Z_{name}^a)"));
    }
    if a < 0.0 {
        le(r(zla) - r(zl), q - r(zl), "rho(Z_l^a) - rho(Z_l) <= quotient - rho(Z_l)");
        le(q - r(zl), 0.0, "quotient - rho(Z_l) <= 0");
    } else {
        le(0.0, q - r(zr), "0 <= quotient - rho(Z_r)");
        le(q - r(zr), r(zra) - r(zr), "quotient - rho(Z_r) <= rho(Z_r^a) - rho(Z_r)");
    }
    Ok(BracketingReport {
        a,
        sup: s,
        sup_a: sa,
        z_left: zl,
        z_right: zr,
        z_left_a: zla,
        z_right_a: zra,
        quotient: q,
        violations,
    })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use proptest::prelude::*;

    use super::*;
    use crate::levy::{sample_levy_path, LevyTriplet};
    use crate::sampler::{GridSpec, JumpRecord, SeedSpec};

    fn line(n: usize) -> Arc<Grid> {
        Arc::new(GridSpec::uniform(n, 1.0).build().unwrap())
    }

    fn path_from(n: usize, f: impl Fn(f64) -> f64) -> PathSample {
        let g = line(n);
        let v = (0..=n).map(|k| f(g.point(k)[0])).collect();
        PathSample::new(g, v).unwrap()
    }

    #[test]
    fn zero_amplitude_is_identity() {
        let p = path_from(16, |t| (7.0 * t).sin());
        let q = perturb_path(&p, &PerturbationSpec::identity(1)).unwrap();
        assert_eq!(p.values, q.values);
    }

    #[test]
    fn drift_slope_increases() {
        let p = path_from(10, |t| t);
        let q = perturb_path(&p, &PerturbationSpec::new(vec![Rho::Identity], vec![0.1])).unwrap();
        for k in 1..=10 {
            let t = k as f64 / 10.0;
            assert!((q.values[k] / t - 1.1).abs() < 1e-14);
        }
    }

    #[test]
    fn field_shift_is_linear_in_coordinates() {
        let g = Arc::new(GridSpec::product(vec![3, 4], vec![1.0, 2.0]).build().unwrap());
        let p = PathSample::new(g.clone(), vec![0.0; g.len()]).unwrap();
        let spec = PerturbationSpec::new(vec![Rho::Identity, Rho::Identity], vec![0.3, -0.7]);
        let q = perturb_path(&p, &spec).unwrap();
        for i in 0..g.len() {
            let z = g.point(i);
            assert!((q.values[i] - (0.3 * z[0] - 0.7 * z[1])).abs() < 1e-15);
        }
    }

    #[test]
    fn jump_values_are_tilted() {
        let g = line(4);
        let p = PathSample::new(g, vec![0.0, 0.0, 1.0, 1.0, 1.0]).unwrap().with_jumps(vec![JumpRecord {
            time: 0.3,
            size: 1.0,
            value: 1.0,
        }]);
        let q = perturb_path(&p, &PerturbationSpec::new(vec![Rho::Identity], vec![2.0])).unwrap();
        let j = q.jumps()[0];
        assert!((j.value - 1.6).abs() < 1e-15);
        assert_eq!(j.size, 1.0);
    }

    #[test]
    fn invalid_rho_rejected() {
        let g = line(8);
        assert!(Rho::Affine { slope: -1.0, intercept: 0.0 }.check_on_grid(&g, 0).is_err());
        assert!(Rho::Power { exponent: 0.0 }.check_on_grid(&g, 0).is_err());
        // Constant after the anchor: not strictly increasing on [0, 1].
        let flat = Rho::KernelSection {
            kernel: KernelSpec::brownian(1.0).unwrap(),
            anchor: vec![0.5],
        };
        assert!(flat.check_on_grid(&g, 0).is_err());
        let ok = Rho::KernelSection {
            kernel: KernelSpec::brownian(1.0).unwrap(),
            anchor: vec![1.0],
        };
        ok.check_on_grid(&g, 0).unwrap();
        assert!(PerturbationSpec::new(vec![Rho::Identity], vec![0.1, 0.2]).validate(&g).is_err());
    }

    #[test]
    fn exp_combination_and_power_values() {
        let e = Rho::ExpCombination { gamma: 1.0 };
        assert!((e.eval_scalar(0.5) - 2.0 * 0.5f64.sinh()).abs() < 1e-15);
        let p = Rho::Power { exponent: 1.4 };
        assert!((p.eval_scalar(0.25) - 0.25f64.powf(1.4)).abs() < 1e-15);
    }

    #[test]
    fn pure_drift_quotient_is_one() {
        let g = line(64);
        let p = sample_levy_path(&LevyTriplet::drift(1.0), g, SeedSpec::new(1, 0)).unwrap();
        for a in [0.5, 0.1, -0.1, -0.5, 2.0] {
            assert!((difference_quotient(&p, a, &Rho::Identity).unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn negative_drift_quotient_is_first_argmax() {
        let g = line(64);
        let p = sample_levy_path(&LevyTriplet::drift(-1.0), g, SeedSpec::new(1, 0)).unwrap();
        // The argmax stays at 0 (L = 0) as long as c + a < 0.
        for a in [0.5, 0.1, -0.1, -0.5] {
            assert!(difference_quotient(&p, a, &Rho::Identity).unwrap().abs() < 1e-12);
        }
    }

    #[test]
    fn parabola_one_sided_limits() {
        let p = path_from(1000, |t| -(t - 0.5) * (t - 0.5));
        let mut last_neg = f64::NEG_INFINITY;
        let mut last_pos = f64::INFINITY;
        for k in 1..=4 {
            let a = 10f64.powi(-k);
            let qp = difference_quotient(&p, a, &Rho::Identity).unwrap();
            let qn = difference_quotient(&p, -a, &Rho::Identity).unwrap();
            // Sandwich: a < 0 quotients sit below rho(Z) and increase to it,
            // a > 0 quotients sit above and decrease.
            assert!(qn <= 0.5 + 1e-12 && qn >= last_neg - 1e-12);
            assert!(qp >= 0.5 - 1e-12 && qp <= last_pos + 1e-12);
            last_neg = qn;
            last_pos = qp;
        }
        assert!((last_neg - 0.5).abs() < 1e-3);
        assert!((last_pos - 0.5).abs() < 1e-3);
        assert!(difference_quotient(&p, 0.0, &Rho::Identity).is_err());
    }

    #[test]
    fn constant_path_is_tight() {
        let p = path_from(32, |_| 2.0);
        let r = check_bracketing(&p, -0.3, &Rho::Identity).unwrap();
        assert!(r.holds(), "{:?}", r.violations);
        assert_eq!(r.z_left_a, 0.0);
        assert!((r.sup_a - 2.0).abs() < 1e-15);
        assert!(r.quotient.abs() < 1e-15);
    }

    #[test]
    fn violations_are_reported() {
        let mut r = check_bracketing(&path_from(8, |t| t), 0.1, &Rho::Identity).unwrap();
        assert!(r.holds());
        r.violations.push("x".into());
        assert!(!r.holds());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn bracketing_holds_on_random_paths(
            vals in proptest::collection::vec(-3.0f64..3.0, 2..40),
            a in prop_oneof![-2.0f64..-1e-3, 1e-3f64..2.0],
            gamma in 0.2f64..3.0,
        ) {
            let n = vals.len() - 1;
            let p = PathSample::new(line(n), vals).unwrap();
            for rho in [Rho::Identity, Rho::ExpCombination { gamma }, Rho::Power { exponent: gamma }] {
                let r = check_bracketing(&p, a, &rho).unwrap();
                prop_assert!(r.holds(), "{:?}", r.violations);
            }
        }

        #[test]
        fn s_is_convex_in_a(vals in proptest::collection::vec(-3.0f64..3.0, 2..40)) {
            let n = vals.len() - 1;
            let p = PathSample::new(line(n), vals).unwrap();
            let prof = Profile::axis(&p.grid, &Rho::Identity, 0).unwrap();
            let a: Vec<f64> = (-10..=10).map(|k| k as f64 * 0.1).collect();
            let s: Vec<f64> = a.iter().map(|&x| perturbed_sup(&p, &prof, x).unwrap()).collect();
            for k in 1..a.len() - 1 {
                prop_assert!(s[k] <= 0.5 * (s[k - 1] + s[k + 1]) + 1e-12);
            }
        }
    }
}
