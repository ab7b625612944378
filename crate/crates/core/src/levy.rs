//! Spectrally positive Lévy paths: drift, Brownian part and compound-Poisson
//! positive jumps, with jumps recorded exactly.

use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, Exp1, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampler::{normal, Grid, GridSpec, JumpRecord, PathSample, SeedSpec};

/// Default absolute tolerance for ties among exact path values.
pub const DEFAULT_TIE_TOL: f64 = 1e-12;

/// Law of the (strictly positive) jump sizes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case", deny_unknown_fields)]
pub enum JumpLaw {
    Exponential { mean: f64 },
    /// Pareto with unit scale and tail index `shape`, conditioned on `<= cap`.
    ParetoTruncated { shape: f64, cap: f64 },
}

impl JumpLaw {
    pub fn validate(&self) -> Result<()> {
        match *self {
            JumpLaw::Exponential { mean } => {
                if !(mean.is_finite() && mean > 0.0) {
                    return Err(Error::domain(format!("jump mean must be positive, got {mean}")));
                }
            }
            JumpLaw::ParetoTruncated { shape, cap } => {
                if !(shape.is_finite() && shape > 0.0) {
                    return Err(Error::domain(format!("pareto shape must be positive, got {shape}")));
                }
                if !(cap.is_finite() && cap > 1.0) {
                    return Err(Error::domain(format!("pareto cap must exceed the unit scale, got {cap}")));
                }
            }
        }
        Ok(())
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            JumpLaw::Exponential { mean } => {
                let e: f64 = Exp1.sample(rng);
                mean * e
            }
            JumpLaw::ParetoTruncated { shape, cap } => {
                let u: f64 = rng.random();
                let mass = -(-shape * cap.ln()).exp_m1(); // 1 - cap^-shape
                (1.0 - u * mass).powf(-1.0 / shape)
            }
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            JumpLaw::Exponential { mean } => mean,
            JumpLaw::ParetoTruncated { shape, cap } => {
                let mass = 1.0 - cap.powf(-shape);
                if (shape - 1.0).abs() < 1e-12 {
                    cap.ln() / mass
                } else {
                    shape / (shape - 1.0) * (1.0 - cap.powf(1.0 - shape)) / mass
                }
            }
        }
    }

    pub fn second_moment(&self) -> f64 {
        match *self {
            JumpLaw::Exponential { mean } => 2.0 * mean * mean,
            JumpLaw::ParetoTruncated { shape, cap } => {
                let mass = 1.0 - cap.powf(-shape);
                if (shape - 2.0).abs() < 1e-12 {
                    2.0 * cap.ln() / mass
                } else {
                    shape / (shape - 2.0) * (1.0 - cap.powf(2.0 - shape)) / mass
                }
            }
        }
    }
}

/// Lévy–Itô triplet: `X(t) = c t + sigma B(t) + sum of jumps up to t`, with
/// jumps arriving at `rate` per unit time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevyTriplet {
    pub c: f64,
    pub sigma: f64,
    #[serde(default)]
    pub rate: f64,
    #[serde(default = "default_law")]
    pub jump_law: JumpLaw,
}

fn default_law() -> JumpLaw {
    JumpLaw::Exponential { mean: 1.0 }
}

impl LevyTriplet {
    pub fn new(c: f64, sigma: f64, rate: f64, jump_law: JumpLaw) -> Result<Self> {
        let t = Self {
            c,
            sigma,
            rate,
            jump_law,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn drift(c: f64) -> Self {
        Self {
            c,
            sigma: 0.0,
            rate: 0.0,
            jump_law: default_law(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.c.is_finite() {
            return Err(Error::domain("drift c must be finite"));
        }
        if !(self.sigma.is_finite() && self.sigma >= 0.0) {
            return Err(Error::domain(format!("sigma must be >= 0, got {}", self.sigma)));
        }
        if !(self.rate.is_finite() && self.rate >= 0.0) {
            return Err(Error::domain(format!("jump rate must be >= 0, got {}", self.rate)));
        }
        self.jump_law.validate()
    }

    /// `E X(t) / t`.
    pub fn mean_rate(&self) -> f64 {
        self.c + self.rate * self.jump_law.mean()
    }

    /// `Var X(t) / t`.
    pub fn variance_rate(&self) -> f64 {
        self.sigma * self.sigma + self.rate * self.jump_law.second_moment()
    }
}

/// Samples one path on a uniform grid over `[0, T]`. Grid values and jump
/// values share one running sum, so equal path values compare equal exactly.
pub fn sample_levy_path(triplet: &LevyTriplet, grid: Arc<Grid>, seed: SeedSpec) -> Result<PathSample> {
    triplet.validate()?;
    let (n, horizon) = match grid.spec() {
        GridSpec::Uniform { n, horizon } => (*n, *horizon),
        _ => return Err(Error::grid("Lévy paths need a uniform one-parameter grid")),
    };
    let mut rng = seed.rng();

    let count = if triplet.rate > 0.0 {
        let p = Poisson::new(triplet.rate * horizon)
            .map_err(|e| Error::domain(format!("poisson intensity: {e}")))?;
        let k: f64 = p.sample(&mut rng);
        k as usize
    } else {
        0
    };
    let mut times: Vec<f64> = (0..count).map(|_| horizon * rng.random::<f64>()).collect();
    times.sort_by(f64::total_cmp);
    let sizes: Vec<f64> = (0..count).map(|_| triplet.jump_law.sample(&mut rng)).collect();

    let mut values = Vec::with_capacity(n + 1);
    let mut jumps = Vec::with_capacity(count);
    values.push(0.0);
    let (mut b, mut jsum, mut t_prev) = (0.0, 0.0, 0.0);
    let advance = |t: f64, rng: &mut crate::sampler::StreamRng, b: &mut f64, t_prev: &mut f64| {
        if triplet.sigma > 0.0 && t > *t_prev {
            *b += (t - *t_prev).sqrt() * normal(rng);
        }
        *t_prev = t;
    };
    let mut next_jump = 0;
    for k in 1..=n {
        let t = grid.point(k)[0];
        while next_jump < count && times[next_jump] <= t {
            let tau = times[next_jump];
            advance(tau, &mut rng, &mut b, &mut t_prev);
            jsum += sizes[next_jump];
            jumps.push(JumpRecord {
                time: tau,
                size: sizes[next_jump],
                value: triplet.c * tau + triplet.sigma * b + jsum,
            });
            next_jump += 1;
        }
        advance(t, &mut rng, &mut b, &mut t_prev);
        values.push(triplet.c * t + triplet.sigma * b + jsum);
    }
    Ok(PathSample::new(grid, values)?.with_jumps(jumps))
}

/// All evaluation points of a one-parameter path (grid points and jump
/// times) in time order, grid point first on equal times.
pub fn evaluation_points(path: &PathSample) -> Vec<(f64, f64)> {
    let grid = &path.grid;
    let jumps = path.jumps();
    let mut out = Vec::with_capacity(path.values.len() + jumps.len());
    let mut j = 0;
    for (k, &v) in path.values.iter().enumerate() {
        let t = grid.point(k)[0];
        while j < jumps.len() && jumps[j].time < t {
            out.push((jumps[j].time, jumps[j].value));
            j += 1;
        }
        out.push((t, v));
    }
    out.extend(jumps[j..].iter().map(|r| (r.time, r.value)));
    out
}

/// `L`: the first time the path comes within `tol` of its supremum.
pub fn first_argmax_time(path: &PathSample, tol: f64) -> f64 {
    let pts = evaluation_points(path);
    let sup = pts.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    pts.iter()
        .filter(|p| p.1 >= sup - tol)
        .map(|p| p.0)
        .fold(f64::INFINITY, f64::min)
}

/// First evaluation time with `|X| > tol`, or `+inf` if there is none.
pub fn exit_time_from_zero(path: &PathSample, tol: f64) -> f64 {
    evaluation_points(path)
        .into_iter()
        .find(|p| p.1.abs() > tol)
        .map_or(f64::INFINITY, |p| p.0)
}

/// `X~(s) = X((T - s)-) - X(T)` on the reflected grid. A jump of size `y` at
/// `tau` becomes a jump of size `-y` at `T - tau`; the reversed path is again
/// cadlag and its records hold its own values.
pub fn reverse_path(path: &PathSample) -> Result<PathSample> {
    if path.dim() != 1 {
        return Err(Error::grid("reversal needs a one-parameter path"));
    }
    let grid = &path.grid;
    let n = path.values.len() - 1;
    let horizon = grid.point(n)[0];
    let terminal = path.values[n];
    let jumps = path.jumps();
    let mut values = Vec::with_capacity(n + 1);
    let mut j = jumps.len();
    for k in (0..=n).rev() {
        let t = grid.point(k)[0];
        while j > 0 && jumps[j - 1].time > t {
            j -= 1;
        }
        // Jumps exactly at t are excluded from the left limit.
        let at_t: f64 = jumps[..j].iter().rev().take_while(|r| r.time == t).map(|r| r.size).sum();
        values.push(path.values[k] - at_t - terminal);
    }
    let reversed: Vec<JumpRecord> = jumps
        .iter()
        .rev()
        .map(|r| JumpRecord {
            time: horizon - r.time,
            size: -r.size,
            value: r.left_limit() - terminal,
        })
        .collect();
    let mut out = PathSample::new(grid.clone(), values)?;
    if path.jumps.is_some() {
        out = out.with_jumps(reversed);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> Arc<Grid> {
        Arc::new(GridSpec::uniform(n, 1.0).build().unwrap())
    }

    fn exp1() -> JumpLaw {
        JumpLaw::Exponential { mean: 1.0 }
    }

    #[test]
    fn pure_drift_values_are_grid_times() {
        let g = grid(16);
        let p = sample_levy_path(&LevyTriplet::drift(1.0), g.clone(), SeedSpec::new(1, 0)).unwrap();
        for k in 0..=16 {
            assert_eq!(p.values[k], g.point(k)[0]);
        }
        assert!(p.jumps().is_empty());
        assert_eq!(first_argmax_time(&p, DEFAULT_TIE_TOL), 1.0);
        assert_eq!(exit_time_from_zero(&p, DEFAULT_TIE_TOL), 1.0 / 16.0);

        let p = sample_levy_path(&LevyTriplet::drift(-1.0), g, SeedSpec::new(1, 0)).unwrap();
        assert_eq!(first_argmax_time(&p, DEFAULT_TIE_TOL), 0.0);
    }

    #[test]
    fn pure_jump_paths() {
        let t = LevyTriplet::new(0.0, 0.0, 5.0, exp1()).unwrap();
        for r in 0..200 {
            let p = sample_levy_path(&t, grid(64), SeedSpec::new(2, r)).unwrap();
            let total: f64 = p.jumps().iter().map(|j| j.size).sum();
            assert!((p.terminal() - total).abs() < 1e-12);
            assert!(p.values.windows(2).all(|w| w[1] >= w[0]));
            assert!(p.jumps().iter().all(|j| j.size > 0.0));
            match p.jumps().first() {
                Some(first) => {
                    assert_eq!(exit_time_from_zero(&p, DEFAULT_TIE_TOL), first.time);
                    // The last jump sets the final record on a nondecreasing path.
                    let last = p.jumps().last().unwrap();
                    assert_eq!(first_argmax_time(&p, DEFAULT_TIE_TOL), last.time);
                }
                None => {
                    assert_eq!(exit_time_from_zero(&p, DEFAULT_TIE_TOL), f64::INFINITY);
                    assert_eq!(first_argmax_time(&p, DEFAULT_TIE_TOL), 0.0);
                }
            }
        }
    }

    #[test]
    fn identically_zero_has_infinite_exit_time() {
        let t = LevyTriplet::drift(0.0);
        let p = sample_levy_path(&t, grid(8), SeedSpec::new(0, 0)).unwrap();
        assert_eq!(exit_time_from_zero(&p, DEFAULT_TIE_TOL), f64::INFINITY);
    }

    #[test]
    fn first_argmax_with_negative_drift_and_jumps() {
        // Brute force: maximize over grid and jump values, earliest time wins.
        let t = LevyTriplet::new(-3.0, 0.0, 4.0, exp1()).unwrap();
        for r in 0..200 {
            let p = sample_levy_path(&t, grid(32), SeedSpec::new(3, r)).unwrap();
            let mut best = (0.0, 0.0);
            for j in p.jumps() {
                if j.value > best.1 + 1e-12 {
                    best = (j.time, j.value);
                }
            }
            for (k, &v) in p.values.iter().enumerate() {
                let tk = p.grid.point(k)[0];
                if v > best.1 + 1e-12 || (v >= best.1 - 1e-12 && tk < best.0) {
                    best = (tk, v);
                }
            }
            assert_eq!(first_argmax_time(&p, DEFAULT_TIE_TOL), best.0);
        }
    }

    #[test]
    fn cadlag_consistency_at_grid_points() {
        // The value at a grid point equals the running value just before it
        // (previous jump record or grid value plus drift over the gap) plus
        // jumps in between, for the pure drift + jump case.
        let t = LevyTriplet::new(0.5, 0.0, 20.0, exp1()).unwrap();
        let p = sample_levy_path(&t, grid(10), SeedSpec::new(4, 0)).unwrap();
        for k in 1..=10 {
            let tk = p.grid.point(k)[0];
            let jumps: f64 = p.jumps().iter().filter(|j| j.time <= tk).map(|j| j.size).sum();
            assert!((p.values[k] - (0.5 * tk + jumps)).abs() < 1e-12);
        }
        for j in p.jumps() {
            let before: f64 = p.jumps().iter().filter(|r| r.time < j.time).map(|r| r.size).sum();
            assert!((j.left_limit() - (0.5 * j.time + before)).abs() < 1e-12);
        }
    }

    #[test]
    fn brownian_case_terminal_variance() {
        let t = LevyTriplet::new(0.0, 1.0, 0.0, exp1()).unwrap();
        let n = 20000;
        let g = grid(32);
        let xs: Vec<f64> = (0..n)
            .map(|r| sample_levy_path(&t, g.clone(), SeedSpec::new(5, r)).unwrap().terminal())
            .collect();
        let var = xs.iter().map(|x| x * x).sum::<f64>() / n as f64;
        // SE of the second moment of N(0,1) is sqrt(2/n).
        assert!((var - 1.0).abs() < 5.0 * (2.0 / n as f64).sqrt(), "{var}");
    }

    #[test]
    fn pareto_sizes_within_support() {
        let law = JumpLaw::ParetoTruncated { shape: 1.5, cap: 10.0 };
        let mut rng = SeedSpec::new(6, 0).rng();
        let n = 100000;
        let xs: Vec<f64> = (0..n).map(|_| law.sample(&mut rng)).collect();
        assert!(xs.iter().all(|&x| (1.0..=10.0).contains(&x)));
        let mean = xs.iter().sum::<f64>() / n as f64;
        let m2 = law.second_moment();
        let se = ((m2 - law.mean().powi(2)) / n as f64).sqrt();
        assert!((mean - law.mean()).abs() < 5.0 * se);
        // Oracle for the mean by midpoint quadrature of the truncated density.
        let dens = |x: f64| 1.5 * x.powf(-2.5) / (1.0 - 10f64.powf(-1.5));
        let k = 200000;
        let h = 9.0 / k as f64;
        let quad: f64 = (0..k).map(|i| 1.0 + (i as f64 + 0.5) * h).map(|x| x * dens(x) * h).sum();
        assert!((quad - law.mean()).abs() < 1e-8);
    }

    #[test]
    fn reversal_of_pure_drift() {
        let g = grid(8);
        let p = sample_levy_path(&LevyTriplet::drift(2.0), g.clone(), SeedSpec::new(0, 0)).unwrap();
        let r = reverse_path(&p).unwrap();
        for k in 0..=8 {
            assert!((r.values[k] + 2.0 * g.point(k)[0]).abs() < 1e-12);
        }
    }

    #[test]
    fn reversal_of_hand_built_path() {
        let g = grid(4);
        // Jump of 1 at 0.3 and of 2 exactly at the grid point 0.5.
        let p = PathSample::new(g, vec![0.0, 0.0, 3.0, 3.0, 3.0])
            .unwrap()
            .with_jumps(vec![
                JumpRecord { time: 0.3, size: 1.0, value: 1.0 },
                JumpRecord { time: 0.5, size: 2.0, value: 3.0 },
            ]);
        let r = reverse_path(&p).unwrap();
        // s = 0.5 reads X(0.5-) = 1, excluding the jump at 0.5.
        assert_eq!(r.values, vec![0.0, 0.0, -2.0, -3.0, -3.0]);
        assert_eq!(r.jumps().len(), 2);
        assert_eq!(r.jumps()[0], JumpRecord { time: 0.5, size: -2.0, value: -2.0 });
        assert!((r.jumps()[1].time - 0.7).abs() < 1e-15);
        assert_eq!(r.jumps()[1].value, -3.0);
        assert_eq!(r.values[0], 0.0);
    }

    #[test]
    fn triplet_validation_and_serde() {
        assert!(LevyTriplet::new(0.0, -1.0, 0.0, exp1()).is_err());
        assert!(LevyTriplet::new(0.0, 1.0, -1.0, exp1()).is_err());
        assert!(LevyTriplet::new(0.0, 1.0, 1.0, JumpLaw::Exponential { mean: 0.0 }).is_err());
        assert!(LevyTriplet::new(0.0, 1.0, 1.0, JumpLaw::ParetoTruncated { shape: 2.0, cap: 1.0 }).is_err());
        let t: LevyTriplet = serde_json::from_str(
            r#"{"c":1.0,"sigma":0.0,"rate":2.0,"jump_law":{"law":"pareto_truncated","shape":1.5,"cap":50.0}}"#,
        )
        .unwrap();
        assert_eq!(t.jump_law, JumpLaw::ParetoTruncated { shape: 1.5, cap: 50.0 });
        assert!(serde_json::from_str::<LevyTriplet>(r#"{"c":1.0,"sigma":0.0,"lambda":2.0}"#).is_err());
    }
}
