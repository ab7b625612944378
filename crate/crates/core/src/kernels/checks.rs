//! Grid diagnostics for the monotonicity and anchor hypotheses used by the
//! covariance identities. A grid check can refute these properties but never
//! certify them on the continuum.

use serde::{Deserialize, Serialize};

use super::Covariance;
use crate::error::Result;

/// Tolerance for "equal" kernel values and for off-diagonal anchor entries.
pub const CONDITION_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotoneViolation {
    pub index: usize,
    pub z_prev: Vec<f64>,
    pub z_next: Vec<f64>,
    pub r_prev: f64,
    pub r_next: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotoneReport {
    pub monotone: bool,
    pub first_violation: Option<MonotoneViolation>,
}

/// Whether `z -> R(z, anchor)` strictly increases along the (ordered) grid.
/// The comparison is strict with zero tolerance.
pub fn check_monotone_in_first_arg<C: Covariance>(
    kernel: &C,
    anchor: &[f64],
    grid: &[Vec<f64>],
) -> Result<MonotoneReport> {
    let mut prev: Option<(usize, f64)> = None;
    for (i, z) in grid.iter().enumerate() {
        let r = kernel.covariance(z, anchor)?;
        if let Some((j, r_prev)) = prev {
            if !(r > r_prev) {
                return Ok(MonotoneReport {
                    monotone: false,
                    first_violation: Some(MonotoneViolation {
                        index: i,
                        z_prev: grid[j].clone(),
                        z_next: z.clone(),
                        r_prev,
                        r_next: r,
                    }),
                });
            }
        }
        prev = Some((i, r));
    }
    Ok(MonotoneReport {
        monotone: true,
        first_violation: None,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionResult {
    pub condition: u8,
    pub description: String,
    pub passed: bool,
    pub witness: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub conditions: Vec<ConditionResult>,
    pub anchor_covariance: Vec<Vec<f64>>,
}

impl ConditionReport {
    pub fn all_passed(&self) -> bool {
        self.conditions.iter().all(|c| c.passed)
    }

    pub fn first_failure(&self) -> Option<&ConditionResult> {
        self.conditions.iter().find(|c| !c.passed)
    }
}

/// Evaluates the four anchor conditions of the multiparameter identity:
///
/// 1. `(X(t^1), ..., X(t^d))` has an invertible diagonal covariance matrix;
/// 2. `R(z, t^i)` depends on `z` only through `z_i`;
/// 3. `R(z, t^i)` is strictly increasing in `z_i`;
/// 4. `R(z, t^i) = 0` when `z_i = 0`.
pub fn validate_anchor_conditions<C: Covariance>(
    kernel: &C,
    anchors: &[Vec<f64>],
    grid: &[Vec<f64>],
) -> Result<ConditionReport> {
    let d = anchors.len();
    let mut sigma = vec![vec![0.0; d]; d];
    for i in 0..d {
        for j in 0..d {
            sigma[i][j] = kernel.covariance(&anchors[i], &anchors[j])?;
        }
    }

    let mut c1 = ConditionResult {
        condition: 1,
        description: "anchor covariance matrix is invertible and diagonal".into(),
        passed: true,
        witness: None,
    };
    'outer: for i in 0..d {
        if !(sigma[i][i] > CONDITION_TOLERANCE) {
            c1.passed = false;
            c1.witness = Some(format!("variance at anchor {i} is {:e}", sigma[i][i]));
            break;
        }
        for j in 0..d {
            let scale = (sigma[i][i] * sigma[j][j]).sqrt().max(1.0);
            if i != j && sigma[i][j].abs() > CONDITION_TOLERANCE * scale {
                c1.passed = false;
                c1.witness = Some(format!(
                    "covariance between anchors {i} and {j} is {:e}, not 0",
                    sigma[i][j]
                ));
                break 'outer;
            }
        }
    }

    let mut c2 = ConditionResult {
        condition: 2,
        description: "R(z, t^i) depends only on z_i".into(),
        passed: true,
        witness: None,
    };
    let mut c3 = ConditionResult {
        condition: 3,
        description: "R(z, t^i) is strictly increasing in z_i".into(),
        passed: true,
        witness: None,
    };
    let mut c4 = ConditionResult {
        condition: 4,
        description: "R(z, t^i) vanishes at z_i = 0".into(),
        passed: true,
        witness: None,
    };

    for (i, anchor) in anchors.iter().enumerate() {
        let mut section: Vec<(f64, f64, usize)> = Vec::with_capacity(grid.len());
        for (k, z) in grid.iter().enumerate() {
            section.push((z[i], kernel.covariance(z, anchor)?, k));
        }
        section.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.2.cmp(&b.2)));

        let mut saw_zero = false;
        let mut group_start = 0;
        let mut prev_group: Option<(f64, f64)> = None;
        while group_start < section.len() {
            let x = section[group_start].0;
            let mut end = group_start;
            while end < section.len() && section[end].0 == x {
                end += 1;
            }
            let rep = section[group_start].1;
            for &(_, r, k) in &section[group_start..end] {
                if c2.passed && (r - rep).abs() > CONDITION_TOLERANCE {
                    c2.passed = false;
                    c2.witness = Some(format!(
                        "anchor {i}: R differs by {:e} across points with z_{i} = {x} (grid point {k})",
                        (r - rep).abs()
                    ));
                }
            }
            if let Some((px, pr)) = prev_group {
                if c3.passed && !(rep > pr) {
                    c3.passed = false;
                    c3.witness = Some(format!(
                        "anchor {i}: R({px}) = {pr} is not below R({x}) = {rep}"
                    ));
                }
            }
            if x == 0.0 {
                saw_zero = true;
                if c4.passed && rep.abs() > CONDITION_TOLERANCE {
                    c4.passed = false;
                    c4.witness = Some(format!("anchor {i}: R = {rep} at z_{i} = 0"));
                }
            }
            prev_group = Some((x, rep));
            group_start = end;
        }
        if !saw_zero && c4.passed {
            c4.passed = false;
            c4.witness = Some(format!("anchor {i}: grid has no point with z_{i} = 0"));
        }
    }

    Ok(ConditionReport {
        conditions: vec![c1, c2, c3, c4],
        anchor_covariance: sigma,
    })
}
