//! End-to-end acceptance criteria at full Monte Carlo size. Each test
//! prints one `PASS`/`FAIL` line to stdout (bypassing output capture) and
//! then asserts.

use std::io::Write;
use std::sync::{Arc, OnceLock};

use rand::seq::IndexedRandom;

use argmaxlab::bridge::{covgamma_check, residual_kernel, AnchorSet};
use argmaxlab::extremum::{sup_and_argmax, DEFAULT_TIE_TOL};
use argmaxlab::harness::{bridge_battery, levy_case_battery, lpp_geodesic_experiment, reversal_battery};
use argmaxlab::kernels::{Covariance, KernelSpec};
use argmaxlab::levy::{JumpLaw, LevyTriplet};
use argmaxlab::mc::{arcsine_cdf, ks_critical_1pct, ks_statistic, map_replicates};
use argmaxlab::perturb::{
    check_bracketing, covariance_identity_1d, covariance_identity_nd, derivative_criterion_check,
    gaussian_gradient_identity, Battery, Estimand, Functional, IdentityReport, IdentitySpec, Rho,
    Statistic,
};
use argmaxlab::process::{ProcessSampler, ProcessSpec};
use argmaxlab::sampler::{GridSpec, SeedSpec};

const N: u64 = 100_000;
const N_HALF: u64 = 50_000;
const FINE: usize = 1 << 14;

fn verdict(criterion: &str, ok: bool, detail: String) {
    let line = format!("{} {criterion}: {detail}", if ok { "PASS" } else { "FAIL" });
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{line}");
    let _ = out.flush();
    assert!(ok, "{line}");
}

fn bm() -> ProcessSpec {
    ProcessSpec::gaussian(KernelSpec::brownian(1.0).unwrap())
}

fn fbm(h: f64) -> ProcessSpec {
    ProcessSpec::gaussian(KernelSpec::fbm(h, 1.0).unwrap())
}

fn pooled(a: &Statistic, b: &Statistic) -> f64 {
    (a.se * a.se + b.se * b.se).sqrt()
}

fn describe(id: &IdentityReport) -> String {
    format!("{} {:.5} vs {:.5} (z {:+.2})", id.name, id.lhs, id.rhs, id.z)
}

/// BM on the fine grid, shared by the identity, fBm and refinement criteria.
fn bm_fine() -> &'static Battery {
    static B: OnceLock<Battery> = OnceLock::new();
    B.get_or_init(|| covariance_identity_1d(&bm(), &GridSpec::uniform(FINE, 1.0), 1.0, N, 101).unwrap())
}

#[test]
fn c01_brownian_identity() {
    let b = bm_fine();
    let z = b.statistic("Z").unwrap();
    let id = b.report("covariance").unwrap();
    let symmetric = (z.mean - 0.5).abs() < 3.0 * z.se;
    verdict(
        "C1 BM identity",
        symmetric && id.z.abs() < 4.0,
        format!("E Z = {:.5} +- {:.5}; {}", z.mean, z.se, describe(&id)),
    );
}

#[test]
fn c02_arcsine_law() {
    let sampler = ProcessSampler::new(&bm(), &GridSpec::uniform(FINE, 1.0)).unwrap();
    let mut zs = map_replicates(N, |r| {
        let path = sampler.sample(SeedSpec::new(102, r))?;
        Ok(sup_and_argmax(&path, DEFAULT_TIE_TOL)?.midpoint()[0])
    })
    .unwrap();
    let d = ks_statistic(&mut zs, arcsine_cdf);
    let crit = ks_critical_1pct(zs.len());
    verdict("C2 arcsine law", d < crit, format!("KS {d:.5} < {crit:.5}"));
}

#[test]
fn c03_fbm_identity() {
    let grid = GridSpec::uniform(FINE, 1.0);
    let mut ok = true;
    let mut parts = Vec::new();
    for (k, h) in [0.3, 0.5, 0.7].into_iter().enumerate() {
        let b = covariance_identity_1d(&fbm(h), &grid, 1.0, N, 103 + k as u64).unwrap();
        let form = b.report("fbm_form").unwrap();
        ok &= form.z.abs() < 4.0;
        parts.push(format!("H={h}: {}", describe(&form)));
        if h == 0.5 {
            let (f, r) = (b.report("covariance").unwrap(), bm_fine().report("covariance").unwrap());
            let dl = (f.lhs - r.lhs).abs() / (f.lhs_se.powi(2) + r.lhs_se.powi(2)).sqrt();
            let dr = (f.rhs - r.rhs).abs() / (f.rhs_se.powi(2) + r.rhs_se.powi(2)).sqrt();
            ok &= dl < 3.0 && dr < 3.0;
            parts.push(format!("vs BM: {dl:.2} and {dr:.2} pooled SEs"));
        }
    }
    verdict("C3 fBm identity", ok, parts.join("; "));
}

#[test]
fn c04_ou_identity() {
    let ou = ProcessSpec::gaussian(KernelSpec::ornstein_uhlenbeck(1.0, 2f64.sqrt(), 1.0).unwrap());
    let b = covariance_identity_1d(&ou, &GridSpec::uniform(4096, 1.0), 1.0, N, 104).unwrap();
    let (c, f) = (b.report("covariance").unwrap(), b.report("ou_form").unwrap());
    verdict(
        "C4 OU identity",
        c.z.abs() < 4.0 && f.z.abs() < 4.0,
        format!("{}; {}", describe(&c), describe(&f)),
    );
}

#[test]
fn c05_derivative_criterion() {
    let b = derivative_criterion_check(&bm(), &GridSpec::uniform(4096, 1.0), &[Rho::Identity], 0.05, N, 105).unwrap();
    let ids: Vec<IdentityReport> = ["derivative_h", "derivative_h2", "richardson"]
        .iter()
        .map(|n| b.report(n).unwrap())
        .collect();
    let ok = ids.iter().all(|i| i.z.abs() < 3.0);
    verdict(
        "C5 derivative criterion",
        ok,
        ids.iter().map(describe).collect::<Vec<_>>().join("; "),
    );
}

#[test]
fn c06_bracketing_inequalities() {
    let sampler = ProcessSampler::new(&bm(), &GridSpec::uniform(1024, 1.0)).unwrap();
    let amplitudes = [0.1, -0.1, 0.01, -0.01];
    let counts = map_replicates(10_000, |r| {
        let path = sampler.sample(SeedSpec::new(106, r))?;
        let mut bad = 0usize;
        for &a in &amplitudes {
            bad += check_bracketing(&path, a, &Rho::Identity)?.violations.len();
        }
        Ok(bad)
    })
    .unwrap();
    let total: usize = counts.iter().sum();
    verdict(
        "C6 bracketing inequalities",
        total == 0,
        format!("{total} violations over {} paths x {} amplitudes", counts.len(), amplitudes.len()),
    );
}

#[test]
fn c07_levy_cases() {
    let grid = Arc::new(GridSpec::uniform(4096, 1.0).build().unwrap());
    let exp = JumpLaw::Exponential { mean: 1.0 };
    let coarse = 2.0 * grid.spacing(0);
    let deltas = [coarse, 1e-6];
    let stat = |t: LevyTriplet, seed: u64, label: &str| {
        levy_case_battery(&t, grid.clone(), &deltas, 10_000, seed)
            .unwrap()
            .statistic(label)
            .unwrap()
            .mean
    };
    let diffusive = stat(LevyTriplet::new(0.0, 1.0, 2.0, exp).unwrap(), 107, &format!("unique@{coarse}"));
    let drift = stat(LevyTriplet::new(1.0, 0.0, 2.0, exp).unwrap(), 108, "at_horizon");
    let jumps = LevyTriplet::new(0.0, 0.0, 2.0, exp).unwrap();
    let b = levy_case_battery(&jumps, grid.clone(), &deltas, 10_000, 109).unwrap();
    let unique = b.statistic("unique@0.000001").unwrap().mean;
    let tau_zero = b.statistic("tau_zero").unwrap().mean;
    verdict(
        "C7 Levy cases",
        diffusive >= 0.99 && drift == 1.0 && unique == 0.0 && tau_zero == 0.0,
        format!(
            "sigma>0 unique {diffusive:.4}; drift argmax at horizon {drift}; pure jump unique {unique}, P(tau=0) {tau_zero}"
        ),
    );
}

#[test]
fn c08_reversed_process() {
    let grid = Arc::new(GridSpec::uniform(1024, 1.0).build().unwrap());
    let times = [0.25, 0.5, 0.75];
    let exp = JumpLaw::Exponential { mean: 1.0 };
    let mut ok = true;
    let mut worst: f64 = 0.0;
    // Compensated: E X = 0, so the reversed means match X literally.
    let centered = LevyTriplet::new(-2.0, 1.0, 2.0, exp).unwrap();
    let b = reversal_battery(&centered, grid.clone(), &times, N_HALF, 110).unwrap();
    for id in b.reports().unwrap() {
        worst = worst.max(id.z.abs());
    }
    for s in times {
        let literal = b
            .evaluate(&IdentitySpec::new(
                "literal",
                Estimand::mean(format!("Xrev@{s}")),
                Estimand::mean(format!("X@{s}")),
            ))
            .unwrap();
        worst = worst.max(literal.z.abs());
    }
    ok &= worst < 5.0;
    // Uncentered: the reversed path has the law of -X.
    let drifting = LevyTriplet::new(0.5, 0.5, 3.0, JumpLaw::Exponential { mean: 0.5 }).unwrap();
    let b = reversal_battery(&drifting, grid, &times, N_HALF, 111).unwrap();
    let worst_signed = b.reports().unwrap().iter().map(|i| i.z.abs()).fold(0.0, f64::max);
    ok &= worst_signed < 5.0;
    verdict(
        "C8 reversed process",
        ok,
        format!("max |z| {worst:.2} (centered), {worst_signed:.2} (drifting, sign-flipped means)"),
    );
}

fn admissible_sets(kernel: &KernelSpec, points: &[Vec<f64>], seed: u64) -> Vec<Vec<Vec<f64>>> {
    let mut rng = SeedSpec::new(seed, 0).rng();
    let mut sets = Vec::new();
    let singles: Vec<Vec<Vec<f64>>> = points.iter().map(|p| vec![p.clone()]).collect();
    let mut pairs = Vec::new();
    if kernel.dim() > 1 {
        for (i, p) in points.iter().enumerate() {
            for q in &points[i + 1..] {
                pairs.push(vec![p.clone(), q.clone()]);
            }
        }
    }
    for pool in [singles, pairs] {
        let ok: Vec<_> = pool
            .into_iter()
            .filter(|s| AnchorSet::new(kernel, s.clone()).is_ok_and(|a| a.is_diagonal()))
            .collect();
        sets.extend(ok.choose_multiple(&mut rng, 3).cloned());
    }
    sets
}

#[test]
fn c09_bridge_algebra() {
    let cases = [
        (KernelSpec::brownian(1.0).unwrap(), GridSpec::uniform(63, 1.0)),
        (KernelSpec::ornstein_uhlenbeck(1.0, 2f64.sqrt(), 1.0).unwrap(), GridSpec::uniform(63, 1.0)),
        (KernelSpec::fbm(0.3, 1.0).unwrap(), GridSpec::uniform(63, 1.0)),
        (KernelSpec::fbm(0.7, 1.0).unwrap(), GridSpec::uniform(63, 1.0)),
        (KernelSpec::sheet_frontier(vec![1.0, 1.0]).unwrap(), GridSpec::product(vec![7, 7], vec![1.0, 1.0])),
        (KernelSpec::sheet(vec![1.0, 1.0]).unwrap(), GridSpec::product(vec![7, 7], vec![1.0, 1.0])),
        (KernelSpec::linear(vec![1.0, 2.0]).unwrap(), GridSpec::product(vec![7, 7], vec![1.0, 2.0])),
        (KernelSpec::additive(2).unwrap(), GridSpec::simplex(2, 10)),
    ];
    let mut worst: f64 = 0.0;
    let mut tried = 0;
    let mut ok = true;
    for (k, (kernel, grid)) in cases.iter().enumerate() {
        let points = grid.build().unwrap().point_list();
        let sets = admissible_sets(kernel, &points, 200 + k as u64);
        ok &= !sets.is_empty();
        for anchors in sets {
            let r = covgamma_check(kernel, &anchors, &points).unwrap();
            worst = worst.max(r.relative_residual);
            tried += 1;
        }
    }
    ok &= worst <= 1e-10;
    let bm = KernelSpec::brownian(1.0).unwrap();
    let points = GridSpec::uniform(63, 1.0).build().unwrap().point_list();
    let anchored = covgamma_check(&bm, &[vec![1.0]], &points).unwrap().relative_residual;
    let residual = residual_kernel(&bm, &[vec![1.0]], 1).unwrap();
    let at_one = points
        .iter()
        .map(|p| residual.covariance(&[1.0], p).unwrap().abs())
        .fold(0.0, f64::max);
    ok &= anchored <= 1e-12 && at_one <= 1e-12;
    verdict(
        "C9 bridge algebra",
        ok,
        format!("max relative residual {worst:.2e} over {tried} anchor sets; BM at 1: {anchored:.2e}"),
    );
}

#[test]
fn c10_conditional_law() {
    let kernel = KernelSpec::brownian(1.0).unwrap();
    let grid = Arc::new(GridSpec::uniform(8, 1.0).build().unwrap());
    let points = grid.point_list();
    let (bridge, recon) = bridge_battery(&kernel, &[vec![1.0]], grid, &points, N_HALF, 112, 5.0).unwrap();
    let target = bridge.report("cov[2,6]").unwrap();
    let pinned = (target.rhs - 0.0625).abs() < 1e-15 && target.z.abs() < 5.0;
    let worst = bridge
        .reports()
        .unwrap()
        .iter()
        .chain(&recon.reports().unwrap())
        .map(|i| i.z.abs())
        .fold(0.0, f64::max);
    verdict(
        "C10 conditional law",
        pinned && worst < 5.0,
        format!("Cov(0.25, 0.75) = {:.5} +- {:.5}; max entrywise |z| {worst:.2}", target.lhs, target.lhs_se),
    );
}

#[test]
fn c11_gradient_identity() {
    let grid = GridSpec::uniform(4096, 1.0);
    let anchors = [vec![1.0]];
    let sup = gaussian_gradient_identity(&bm(), &grid, &Functional::Supremum, &anchors, 0.05, N, 113)
        .unwrap()
        .report("gradient_1")
        .unwrap();
    let point = gaussian_gradient_identity(&bm(), &grid, &Functional::Point { at: vec![1.0] }, &anchors, 0.05, N, 114)
        .unwrap()
        .report("gradient_1")
        .unwrap();
    let near_half = (sup.lhs - 0.5).abs() < 4.0 * sup.lhs_se + 0.01 && (sup.rhs - 0.5).abs() < 4.0 * sup.rhs_se + 0.01;
    verdict(
        "C11 gradient identity",
        sup.z.abs() < 4.0 && near_half && (point.lhs - 1.0).abs() < 1e-9,
        format!("Y = S: {}; Y = X(1): derivative {:.12}", describe(&sup), point.lhs),
    );
}

#[test]
fn c12_multiparameter_battery() {
    let sheet = ProcessSpec::gaussian(KernelSpec::sheet_frontier(vec![1.0, 1.0]).unwrap());
    let linear = ProcessSpec::gaussian(KernelSpec::linear(vec![1.0, 2.0]).unwrap());
    let runs = [
        (
            "sheet",
            covariance_identity_nd(&sheet, &GridSpec::product(vec![128, 128], vec![1.0, 1.0]), &[vec![1.0, 0.0], vec![0.0, 1.0]], N_HALF, 115)
                .unwrap(),
        ),
        (
            "linear",
            covariance_identity_nd(&linear, &GridSpec::product(vec![64, 64], vec![1.0, 2.0]), &[vec![1.0, 0.0], vec![0.0, 2.0]], N_HALF, 116)
                .unwrap(),
        ),
    ];
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, b) in &runs {
        for id in b.reports().unwrap() {
            ok &= id.z.abs() < 4.0;
            parts.push(format!("{name} {}", describe(&id)));
        }
    }
    for (stages, res, seed) in [(1, 4096, 117), (2, 256, 118)] {
        let report = lpp_geodesic_experiment(stages, res, N_HALF, seed).unwrap();
        let b = &report.batteries[0];
        for i in 1..=stages {
            let id = b.report(&format!("covariance_{i}")).unwrap();
            ok &= id.z.abs() < 4.0;
            parts.push(format!("additive n={stages} {}", describe(&id)));
        }
        if stages == 1 {
            let z = b.statistic("Z_1").unwrap();
            ok &= (z.mean - 0.5).abs() < 3.0 * z.se;
            parts.push(format!("additive n=1 E Z = {:.5} +- {:.5}", z.mean, z.se));
        }
    }
    verdict("C12 multiparameter battery", ok, parts.join("; "));
}

#[test]
fn c13_grid_refinement() {
    let coarse = bm_fine().statistic("Z").unwrap();
    let fine = covariance_identity_1d(&bm(), &GridSpec::uniform(1 << 16, 1.0), 1.0, N, 119)
        .unwrap()
        .statistic("Z")
        .unwrap();
    let se = pooled(&coarse, &fine);
    let gap = (fine.mean - coarse.mean).abs();
    verdict(
        "C13 grid refinement",
        gap < 3.0 * se,
        format!("E Z: n=2^14 {:.5}, n=2^16 {:.5}; gap {gap:.5} < {:.5}", coarse.mean, fine.mean, 3.0 * se),
    );
}
