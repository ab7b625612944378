use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Declarative grid description, as it appears in experiment configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GridSpec {
    /// `n` subintervals of `[0, horizon]`.
    Uniform { n: usize, horizon: f64 },
    /// Product of uniform axes, `n[i]` subintervals of `[0, horizon[i]]`.
    Product { n: Vec<usize>, horizon: Vec<f64> },
    /// Lattice points of `{u : u_i >= 0, sum u_i <= 1}` at spacing `1/resolution`.
    Simplex { dim: usize, resolution: usize },
}

impl GridSpec {
    pub fn uniform(n: usize, horizon: f64) -> Self {
        GridSpec::Uniform { n, horizon }
    }

    pub fn product(n: Vec<usize>, horizon: Vec<f64>) -> Self {
        GridSpec::Product { n, horizon }
    }

    pub fn simplex(dim: usize, resolution: usize) -> Self {
        GridSpec::Simplex { dim, resolution }
    }

    pub fn dim(&self) -> usize {
        match self {
            GridSpec::Uniform { .. } => 1,
            GridSpec::Product { n, .. } => n.len(),
            GridSpec::Simplex { dim, .. } => *dim,
        }
    }

    /// Same grid kind with every axis resolution replaced by `n`.
    pub fn with_resolution(&self, n: usize) -> Self {
        match self {
            GridSpec::Uniform { horizon, .. } => GridSpec::Uniform { n, horizon: *horizon },
            GridSpec::Product { n: ns, horizon } => GridSpec::Product {
                n: vec![n; ns.len()],
                horizon: horizon.clone(),
            },
            GridSpec::Simplex { dim, .. } => GridSpec::Simplex {
                dim: *dim,
                resolution: n,
            },
        }
    }

    /// Number of points the grid will have.
    pub fn point_count(&self) -> usize {
        match self {
            GridSpec::Uniform { n, .. } => n + 1,
            GridSpec::Product { n, .. } => n.iter().map(|k| k + 1).product(),
            GridSpec::Simplex { dim, resolution } => {
                // C(resolution + dim, dim)
                let mut c: u128 = 1;
                for i in 1..=*dim as u128 {
                    c = c * (*resolution as u128 + i) / i;
                }
                c as usize
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::grid(msg));
        match self {
            GridSpec::Uniform { n, horizon } => {
                if *n == 0 {
                    return bad("uniform grid needs n >= 1".into());
                }
                if !(horizon.is_finite() && *horizon > 0.0) {
                    return bad(format!("uniform grid horizon must be > 0, got {horizon}"));
                }
            }
            GridSpec::Product { n, horizon } => {
                if n.is_empty() || n.len() != horizon.len() {
                    return bad("product grid needs one n and one horizon per axis".into());
                }
                if n.contains(&0) {
                    return bad("product grid needs n >= 1 on every axis".into());
                }
                if horizon.iter().any(|h| !(h.is_finite() && *h > 0.0)) {
                    return bad("product grid horizons must be > 0".into());
                }
            }
            GridSpec::Simplex { dim, resolution } => {
                if *dim == 0 || *resolution == 0 {
                    return bad("simplex grid needs dim >= 1 and resolution >= 1".into());
                }
            }
        }
        if self.point_count() > 50_000_000 {
            return bad(format!("grid has {} points; refusing to allocate", self.point_count()));
        }
        Ok(())
    }

    pub fn build(&self) -> Result<Grid> {
        Grid::new(self.clone())
    }
}

/// Materialized grid: points in lexicographic order, origin first.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    spec: GridSpec,
    dim: usize,
    coords: Vec<f64>,
    lattice: Vec<u32>,
    steps: Vec<usize>,
    horizon: Vec<f64>,
}

fn axis_coord(k: usize, n: usize, horizon: f64) -> f64 {
    if k == n {
        horizon
    } else {
        horizon * (k as f64 / n as f64)
    }
}

impl Grid {
    pub fn new(spec: GridSpec) -> Result<Self> {
        spec.validate()?;
        let dim = spec.dim();
        let count = spec.point_count();
        let mut coords = Vec::with_capacity(count * dim);
        let mut lattice = Vec::with_capacity(count * dim);
        let (steps, horizon) = match &spec {
            GridSpec::Uniform { n, horizon } => {
                for k in 0..=*n {
                    coords.push(axis_coord(k, *n, *horizon));
                    lattice.push(k as u32);
                }
                (vec![*n], vec![*horizon])
            }
            GridSpec::Product { n, horizon } => {
                let mut idx = vec![0usize; dim];
                for _ in 0..count {
                    for a in 0..dim {
                        coords.push(axis_coord(idx[a], n[a], horizon[a]));
                        lattice.push(idx[a] as u32);
                    }
                    // Odometer with the last axis fastest.
                    for a in (0..dim).rev() {
                        idx[a] += 1;
                        if idx[a] <= n[a] {
                            break;
                        }
                        idx[a] = 0;
                    }
                }
                (n.clone(), horizon.clone())
            }
            GridSpec::Simplex { dim, resolution } => {
                let m = *resolution;
                let mut idx = vec![0usize; *dim];
                simplex_points(&mut idx, 0, m, &mut |l| {
                    for &x in l {
                        coords.push(axis_coord(x, m, 1.0));
                        lattice.push(x as u32);
                    }
                });
                (vec![m; *dim], vec![1.0; *dim])
            }
        };
        debug_assert_eq!(coords.len(), count * dim);
        Ok(Grid {
            spec,
            dim,
            coords,
            lattice,
            steps,
            horizon,
        })
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    #[inline]
    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    #[inline]
    pub fn lattice(&self, i: usize) -> &[u32] {
        &self.lattice[i * self.dim..(i + 1) * self.dim]
    }

    /// Flat coordinate storage, `dim` values per point.
    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn point_list(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|i| self.point(i).to_vec()).collect()
    }

    /// Number of subintervals along `axis`.
    pub fn steps(&self, axis: usize) -> usize {
        self.steps[axis]
    }

    pub fn horizon(&self, axis: usize) -> f64 {
        self.horizon[axis]
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.horizon[axis] / self.steps[axis] as f64
    }

    /// Coordinate value of lattice index `k` on `axis`.
    pub fn axis_value(&self, axis: usize, k: usize) -> f64 {
        axis_coord(k, self.steps[axis], self.horizon[axis])
    }

    pub fn is_simplex(&self) -> bool {
        matches!(self.spec, GridSpec::Simplex { .. })
    }

    /// Index of the grid point equal to `z` (within `1e-12` per coordinate).
    pub fn index_of(&self, z: &[f64]) -> Option<usize> {
        if z.len() != self.dim {
            return None;
        }
        let mut key = Vec::with_capacity(self.dim);
        for (a, &x) in z.iter().enumerate() {
            let k = (x / self.spacing(a)).round();
            if k < 0.0 || k > self.steps[a] as f64 {
                return None;
            }
            let k = k as usize;
            if (self.axis_value(a, k) - x).abs() > 1e-12 * self.horizon[a].max(1.0) {
                return None;
            }
            key.push(k as u32);
        }
        let (mut lo, mut hi) = (0usize, self.len());
        while lo < hi {
            let mid = (lo + hi) / 2;
            match self.lattice(mid).cmp(&key[..]) {
                std::cmp::Ordering::Less => lo = mid + 1,
                std::cmp::Ordering::Greater => hi = mid,
                std::cmp::Ordering::Equal => return Some(mid),
            }
        }
        None
    }

    /// Largest index whose (one-parameter) time is `<= t`, clamped to the grid.
    pub fn floor_index(&self, t: f64) -> usize {
        debug_assert_eq!(self.dim, 1);
        let n = self.steps[0];
        let mut k = ((t / self.spacing(0)).floor().max(0.0) as usize).min(n);
        // Guard against rounding in t / spacing.
        while k > 0 && self.coords[k] > t {
            k -= 1;
        }
        while k < n && self.coords[k + 1] <= t {
            k += 1;
        }
        k
    }
}

fn simplex_points(
    idx: &mut Vec<usize>,
    axis: usize,
    remaining: usize,
    emit: &mut impl FnMut(&[usize]),
) {
    if axis == idx.len() {
        emit(idx);
        return;
    }
    for k in 0..=remaining {
        idx[axis] = k;
        simplex_points(idx, axis + 1, remaining - k, emit);
    }
    idx[axis] = 0;
}
