//! Exact Euclidean distance to the discrete boundary, the inradius, the
//! geometric infinity-eigenvalue and ridge / max-set detection.
//!
//! The transform is Meijster's two-pass separable algorithm carried out in
//! integer lattice units, so every value is `h * sqrt(n)` for the exact
//! integer `n = di^2 + dj^2` of the nearest non-interior cell centre.

use std::collections::HashSet;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::grid::{GridDomain, ScalarField};

/// Distance from each interior cell centre to the nearest non-interior cell
/// centre; 0 on non-interior cells.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceField {
    field: ScalarField,
}

impl DistanceField {
    pub fn domain(&self) -> &Arc<GridDomain> {
        self.field.domain()
    }
    pub fn values(&self) -> &[f64] {
        self.field.values()
    }
    pub fn get(&self, k: usize) -> f64 {
        self.field.get(k)
    }
    pub fn as_field(&self) -> &ScalarField {
        &self.field
    }
    pub fn into_field(self) -> ScalarField {
        self.field
    }
}

pub fn distance_transform(domain: &Arc<GridDomain>) -> DistanceField {
    distance_transform_with(domain, Execution::default())
}

pub fn distance_transform_with(domain: &Arc<GridDomain>, exec: Execution) -> DistanceField {
    let sq = squared_lattice_distance(domain, exec);
    let h = domain.h();
    let values = sq
        .iter()
        .enumerate()
        .map(|(k, &n)| {
            if domain.is_interior(k) {
                h * (n as f64).sqrt()
            } else {
                0.0
            }
        })
        .collect();
    DistanceField {
        field: ScalarField::from_values(domain.clone(), values)
            .expect("transform output has grid length"),
    }
}

/// Squared lattice distance to the nearest non-interior cell (row-major).
fn squared_lattice_distance(domain: &GridDomain, exec: Execution) -> Vec<i64> {
    let (nx, ny) = (domain.nx(), domain.ny());
    let far = (nx + ny) as i64;

    // Pass 1: vertical distance to the nearest feature within each column,
    // stored column-major.
    let mut g = vec![0i64; nx * ny];
    exec::fill_chunks(exec, &mut g, ny, |x, col| {
        let feature = |y: usize| !domain.is_interior(domain.index(x, y));
        col[0] = if feature(0) { 0 } else { far };
        for y in 1..ny {
            col[y] = if feature(y) { 0 } else { col[y - 1] + 1 };
        }
        for y in (0..ny.saturating_sub(1)).rev() {
            if col[y + 1] < col[y] {
                col[y] = col[y + 1] + 1;
            }
        }
    });

    // Pass 2: lower envelope of parabolas along each row.
    let mut out = vec![0i64; nx * ny];
    exec::fill_chunks(exec, &mut out, nx, |y, row| {
        let gy = |i: usize| g[i * ny + y];
        let f = |x: usize, i: usize| {
            let dx = x as i64 - i as i64;
            dx * dx + gy(i) * gy(i)
        };
        let sep = |i: usize, u: usize| {
            let (i2, u2) = ((i * i) as i64, (u * u) as i64);
            (u2 - i2 + gy(u) * gy(u) - gy(i) * gy(i)).div_euclid(2 * (u as i64 - i as i64))
        };
        let mut s = vec![0usize; nx];
        let mut t = vec![0usize; nx];
        let mut q: isize = 0;
        for u in 1..nx {
            while q >= 0 && f(t[q as usize], s[q as usize]) > f(t[q as usize], u) {
                q -= 1;
            }
            if q < 0 {
                q = 0;
                s[0] = u;
            } else {
                let w = 1 + sep(s[q as usize], u);
                if w >= 0 && (w as usize) < nx {
                    q += 1;
                    s[q as usize] = u;
                    t[q as usize] = w as usize;
                }
            }
        }
        for u in (0..nx).rev() {
            row[u] = f(u, s[q as usize]);
            if u == t[q as usize] {
                q -= 1;
            }
        }
    });
    out
}

/// Largest distance value, the grid inradius.
pub fn inradius(dist: &DistanceField) -> Result<f64> {
    let domain = dist.domain();
    if domain.interior_cells().is_empty() {
        return Err(Error::EmptyInterior);
    }
    let r = domain
        .interior_cells()
        .iter()
        .map(|&k| dist.get(k))
        .fold(0.0f64, f64::max);
    if r > 0.0 {
        Ok(r)
    } else {
        Err(Error::EmptyInterior)
    }
}

/// `1 / inradius`, the first infinity-eigenvalue of the grid domain.
pub fn lambda_infinity(domain: &Arc<GridDomain>) -> Result<f64> {
    Ok(1.0 / inradius(&distance_transform(domain))?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RidgeInfo {
    pub inradius: f64,
    pub tolerance: f64,
    /// Cells within `tolerance` of the maximal distance.
    pub max_cells: Vec<usize>,
    /// Cells with two well separated nearest boundary pieces, plus the max set.
    pub ridge_cells: Vec<usize>,
    pub ridge_equals_max: bool,
    /// Largest distance from a ridge cell to the max set.
    pub ridge_excess: f64,
}

/// Default multiplicity tolerance, 1.5 h.
pub fn default_ridge_tolerance(domain: &GridDomain) -> f64 {
    1.5 * domain.h()
}

/// Detects the ridge set (points with two distinct nearest boundary points)
/// and the max set of the distance function.
///
/// For each interior cell `x` with distance `d`, the near-nearest set is the
/// boundary cells within `d + tau`; they lie in a thin annulus around `x`.
/// Sorted by angle, the set splits into clusters wherever consecutive points
/// are more than `max(2 tau, sqrt(2 d tau + tau^2))` apart in arc length, the
/// second term being the half-chord the window cuts from a straight wall.
/// `x` is a ridge cell when at least two clusters remain. A smooth piece of
/// boundary yields one cluster however long it is, and the half-chord link
/// bridges the gaps that rasterization staircases leave near the window edge.
/// Max cells are always ridge cells. The two sets are reported equal when
/// every ridge cell lies within `2 tau` of the max set.
pub fn ridge_analysis(dist: &DistanceField, tolerance: f64) -> Result<RidgeInfo> {
    crate::error::check_positive("tolerance", tolerance)?;
    let domain = dist.domain().clone();
    let radius = inradius(dist)?;
    let h = domain.h();
    // boundary cells bucketed by lattice column
    let (col0, _) = domain.lattice(0);
    let mut columns: Vec<Vec<i64>> = vec![Vec::new(); domain.nx()];
    for k in domain.boundary_cells() {
        let (bi, bj) = domain.lattice(k);
        columns[(bi - col0) as usize].push(bj);
    }
    let interior = domain.interior_cells();
    let tau_cells = tolerance / h;

    let detected: Vec<bool> = exec::map_collect(Execution::default(), interior.len(), |n| {
        let k = interior[n];
        let (xi, xj) = domain.lattice(k);
        let reach = dist.get(k) / h + tau_cells;
        let reach_sq = reach * reach;
        let lo = ((xi as f64 - reach).floor() as i64).max(col0);
        let hi = ((xi as f64 + reach).ceil() as i64).min(col0 + domain.nx() as i64 - 1);
        let mut angles = Vec::new();
        for bi in lo..=hi {
            let di = bi - xi;
            for &bj in &columns[(bi - col0) as usize] {
                let dj = bj - xj;
                if ((di * di + dj * dj) as f64) < reach_sq {
                    angles.push((dj as f64).atan2(di as f64));
                }
            }
        }
        let d = dist.get(k) / h;
        let link = (2.0 * d * tau_cells + tau_cells * tau_cells)
            .sqrt()
            .max(2.0 * tau_cells);
        angular_clusters(&mut angles, d, link) >= 2
    });

    let max_cells: Vec<usize> = interior
        .iter()
        .copied()
        .filter(|&k| dist.get(k) >= radius - tolerance)
        .collect();
    let max_set: HashSet<usize> = max_cells.iter().copied().collect();
    let ridge_cells: Vec<usize> = interior
        .iter()
        .enumerate()
        .filter(|&(n, k)| detected[n] || max_set.contains(k))
        .map(|(_, &k)| k)
        .collect();

    let max_pts: Vec<(i64, i64)> = max_cells.iter().map(|&k| domain.lattice(k)).collect();
    let ridge_excess = ridge_cells
        .iter()
        .filter(|k| !max_set.contains(k))
        .map(|&k| {
            let (xi, xj) = domain.lattice(k);
            let best = max_pts
                .iter()
                .map(|&(a, b)| ((a - xi).pow(2) + (b - xj).pow(2)) as f64)
                .fold(f64::INFINITY, f64::min);
            best.sqrt() * h
        })
        .fold(0.0f64, f64::max);

    Ok(RidgeInfo {
        inradius: radius,
        tolerance,
        max_cells,
        ridge_cells,
        ridge_equals_max: ridge_excess <= 2.0 * tolerance,
        ridge_excess,
    })
}

/// Number of clusters among boundary points seen from a cell at distance
/// `radius`: points are sorted by angle and split wherever two angular
/// neighbours are more than `link` apart in arc length at `radius`.
fn angular_clusters(angles: &mut [f64], radius: f64, link: f64) -> usize {
    if angles.len() < 2 {
        return angles.len();
    }
    angles.sort_by(f64::total_cmp);
    let max_gap = link / radius.max(f64::MIN_POSITIVE);
    let wrap = angles[0] + std::f64::consts::TAU - angles[angles.len() - 1];
    let gaps = angles
        .windows(2)
        .map(|w| w[1] - w[0])
        .chain(std::iter::once(wrap))
        .filter(|&g| g > max_gap)
        .count();
    gaps.max(1)
}
