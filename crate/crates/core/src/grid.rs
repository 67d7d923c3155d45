//! Uniform Cartesian grids, the shape catalog and grid functions.
//!
//! Cells are addressed by a linear index `j * nx + i` (x fastest). Cell
//! centres sit at `((i - cx) h, (j - cy) h)` so every catalog shape is
//! centred on the origin and symmetric cell rows are exactly symmetric in
//! floating point. A cell is interior iff its centre lies strictly inside the
//! shape; all other cells carry the Dirichlet value 0 and form the boundary.

use std::collections::VecDeque;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{check_positive, Error, Result};

/// Geometric description of a catalog domain, in physical units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shape {
    /// The open interval `(-length/2, length/2)`.
    Interval {
        length: f64,
    },
    /// Axis-aligned open square centred at the origin.
    Square {
        side: f64,
    },
    Disk {
        radius: f64,
    },
    /// Convex hull of two disks of equal radius centred at `(±core_length/2, 0)`.
    Stadium {
        radius: f64,
        core_length: f64,
    },
    Annulus {
        r_in: f64,
        r_out: f64,
    },
    /// Two disks joined by a horizontal bar of half-width `bridge_halfwidth`;
    /// the gap between the disks is `bridge_length`.
    Dumbbell {
        bulb_radius: f64,
        bridge_halfwidth: f64,
        bridge_length: f64,
    },
}

/// A shape plus the resolution it is rasterized at.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeSpec {
    #[serde(flatten)]
    pub shape: Shape,
    pub h: f64,
}

impl ShapeSpec {
    pub fn new(shape: Shape, h: f64) -> Self {
        ShapeSpec { shape, h }
    }
}

impl Shape {
    pub fn dim(&self) -> usize {
        match self {
            Shape::Interval { .. } => 1,
            _ => 2,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Shape::Interval { .. } => "interval",
            Shape::Square { .. } => "square",
            Shape::Disk { .. } => "disk",
            Shape::Stadium { .. } => "stadium",
            Shape::Annulus { .. } => "annulus",
            Shape::Dumbbell { .. } => "dumbbell",
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Shape::Interval { length } => check_positive("length", length),
            Shape::Square { side } => check_positive("side", side),
            Shape::Disk { radius } => check_positive("radius", radius),
            Shape::Stadium {
                radius,
                core_length,
            } => {
                check_positive("radius", radius)?;
                if !(core_length.is_finite() && core_length >= 0.0) {
                    return Err(Error::InvalidParameter {
                        name: "core_length",
                        value: core_length,
                        reason: "must be finite and >= 0".into(),
                    });
                }
                Ok(())
            }
            Shape::Annulus { r_in, r_out } => {
                check_positive("r_in", r_in)?;
                check_positive("r_out", r_out)?;
                if r_out <= r_in {
                    return Err(Error::InvalidParameter {
                        name: "r_out",
                        value: r_out,
                        reason: format!("must exceed r_in = {r_in}"),
                    });
                }
                Ok(())
            }
            Shape::Dumbbell {
                bulb_radius,
                bridge_halfwidth,
                bridge_length,
            } => {
                check_positive("bulb_radius", bulb_radius)?;
                check_positive("bridge_halfwidth", bridge_halfwidth)?;
                check_positive("bridge_length", bridge_length)?;
                if bridge_halfwidth >= bulb_radius {
                    return Err(Error::InvalidParameter {
                        name: "bridge_halfwidth",
                        value: bridge_halfwidth,
                        reason: format!("must be smaller than bulb_radius = {bulb_radius}"),
                    });
                }
                Ok(())
            }
        }
    }

    /// Half extents of the bounding box.
    fn half_extents(&self) -> (f64, f64) {
        match *self {
            Shape::Interval { length } => (length / 2.0, 0.0),
            Shape::Square { side } => (side / 2.0, side / 2.0),
            Shape::Disk { radius } => (radius, radius),
            Shape::Stadium {
                radius,
                core_length,
            } => (core_length / 2.0 + radius, radius),
            Shape::Annulus { r_out, .. } => (r_out, r_out),
            Shape::Dumbbell {
                bulb_radius,
                bridge_length,
                ..
            } => (bridge_length / 2.0 + 2.0 * bulb_radius, bulb_radius),
        }
    }

    /// Centres of the maximal inscribed balls' "natural" seeds, used for
    /// asymmetric initializations: for the dumbbell the two bulb centres.
    pub fn bulb_centers(&self) -> Vec<(f64, f64)> {
        match *self {
            Shape::Dumbbell {
                bulb_radius,
                bridge_length,
                ..
            } => {
                let c = bridge_length / 2.0 + bulb_radius;
                vec![(-c, 0.0), (c, 0.0)]
            }
            Shape::Stadium { core_length, .. } => {
                vec![(-core_length / 2.0, 0.0), (core_length / 2.0, 0.0)]
            }
            _ => vec![(0.0, 0.0)],
        }
    }

    /// Strict membership of the point `(x, y)`, with a margin `eps` so that
    /// centres lying on the boundary up to round-off count as outside.
    pub fn contains(&self, x: f64, y: f64, eps: f64) -> bool {
        match *self {
            Shape::Interval { length } => x.abs() < length / 2.0 - eps,
            Shape::Square { side } => x.abs().max(y.abs()) < side / 2.0 - eps,
            Shape::Disk { radius } => x.hypot(y) < radius - eps,
            Shape::Stadium {
                radius,
                core_length,
            } => {
                let dx = (x.abs() - core_length / 2.0).max(0.0);
                dx.hypot(y) < radius - eps
            }
            Shape::Annulus { r_in, r_out } => {
                let r = x.hypot(y);
                r > r_in + eps && r < r_out - eps
            }
            Shape::Dumbbell {
                bulb_radius,
                bridge_halfwidth,
                bridge_length,
            } => {
                let c = bridge_length / 2.0 + bulb_radius;
                let in_bulb = (x.abs() - c).hypot(y) < bulb_radius - eps;
                let in_bridge = x.abs() < c && y.abs() < bridge_halfwidth - eps;
                in_bulb || in_bridge
            }
        }
    }
}

/// Uniform grid with an interior mask. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct GridDomain {
    nx: usize,
    ny: usize,
    dim: usize,
    h: f64,
    /// Index of the cell whose centre is the origin.
    cx: usize,
    cy: usize,
    interior: Vec<bool>,
    interior_cells: Vec<usize>,
    name: String,
    shape: Option<Shape>,
}

impl GridDomain {
    /// Builds a domain from an explicit mask, checking every grid invariant.
    ///
    /// For `dim == 1` the grid must have `ny == 1`.
    pub fn from_mask(
        nx: usize,
        ny: usize,
        dim: usize,
        h: f64,
        mask: Vec<bool>,
        name: impl Into<String>,
    ) -> Result<Self> {
        check_positive("h", h)?;
        match dim {
            1 if ny == 1 && nx >= 3 => {}
            2 if nx >= 3 && ny >= 3 => {}
            _ => {
                return Err(Error::InvalidDomain(format!(
                    "dim {dim} grid {nx}x{ny}: every axis needs at least 3 cells"
                )))
            }
        }
        if mask.len() != nx * ny {
            return Err(Error::InvalidDomain(format!(
                "mask has {} entries, grid has {}",
                mask.len(),
                nx * ny
            )));
        }
        let interior_cells: Vec<usize> = (0..mask.len()).filter(|&k| mask[k]).collect();
        if interior_cells.is_empty() {
            return Err(Error::EmptyInterior);
        }
        for &k in &interior_cells {
            let (i, j) = (k % nx, k / nx);
            let on_edge = i == 0 || i == nx - 1 || (dim == 2 && (j == 0 || j == ny - 1));
            if on_edge {
                return Err(Error::InvalidDomain(format!(
                    "interior cell ({i},{j}) touches the grid edge; one cell of padding is required"
                )));
            }
        }
        let domain = GridDomain {
            nx,
            ny,
            dim,
            h,
            cx: nx / 2,
            cy: ny / 2,
            interior: mask,
            interior_cells,
            name: name.into(),
            shape: None,
        };
        let components = domain.count_components();
        if components != 1 {
            return Err(Error::Disconnected { components });
        }
        Ok(domain)
    }

    pub fn nx(&self) -> usize {
        self.nx
    }
    pub fn ny(&self) -> usize {
        self.ny
    }
    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn h(&self) -> f64 {
        self.h
    }
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }
    pub fn is_empty(&self) -> bool {
        self.interior_cells.is_empty()
    }
    pub fn name(&self) -> &str {
        &self.name
    }
    pub fn shape(&self) -> Option<&Shape> {
        self.shape.as_ref()
    }
    pub fn is_interior(&self, k: usize) -> bool {
        self.interior[k]
    }
    pub fn interior_mask(&self) -> &[bool] {
        &self.interior
    }
    /// Interior cells in increasing linear index.
    pub fn interior_cells(&self) -> &[usize] {
        &self.interior_cells
    }
    /// Cell volume `h^n`.
    pub fn cell_volume(&self) -> f64 {
        self.h.powi(self.dim as i32)
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn ij(&self, k: usize) -> (usize, usize) {
        (k % self.nx, k / self.nx)
    }

    /// Integer lattice offset of cell `k` from the origin cell.
    pub fn lattice(&self, k: usize) -> (i64, i64) {
        let (i, j) = self.ij(k);
        (i as i64 - self.cx as i64, j as i64 - self.cy as i64)
    }

    /// Physical coordinates of the centre of cell `k`.
    pub fn center(&self, k: usize) -> (f64, f64) {
        let (a, b) = self.lattice(k);
        (a as f64 * self.h, b as f64 * self.h)
    }

    /// Linear index of the cell displaced by `(di, dj)`, if inside the grid.
    pub fn offset(&self, k: usize, di: i64, dj: i64) -> Option<usize> {
        let (i, j) = self.ij(k);
        let ni = i as i64 + di;
        let nj = j as i64 + dj;
        if ni < 0 || nj < 0 || ni >= self.nx as i64 || nj >= self.ny as i64 {
            return None;
        }
        Some(nj as usize * self.nx + ni as usize)
    }

    /// Axis neighbours (2 in 1D, 4 in 2D) that exist on the grid.
    pub fn axis_neighbors(&self, k: usize) -> impl Iterator<Item = usize> + '_ {
        let dirs: &[(i64, i64)] = if self.dim == 1 {
            &[(1, 0), (-1, 0)]
        } else {
            &[(1, 0), (-1, 0), (0, 1), (0, -1)]
        };
        dirs.iter().filter_map(move |&(a, b)| self.offset(k, a, b))
    }

    /// Non-interior cells with at least one interior axis neighbour: the
    /// discrete boundary. Every nearest non-interior cell of an interior
    /// cell belongs to this set.
    pub fn boundary_cells(&self) -> Vec<usize> {
        (0..self.len())
            .filter(|&k| !self.interior[k] && self.axis_neighbors(k).any(|n| self.interior[n]))
            .collect()
    }

    fn count_components(&self) -> usize {
        let mut seen = vec![false; self.len()];
        let mut components = 0;
        let mut queue = VecDeque::new();
        for &start in &self.interior_cells {
            if seen[start] {
                continue;
            }
            components += 1;
            seen[start] = true;
            queue.push_back(start);
            while let Some(k) = queue.pop_front() {
                for n in self.axis_neighbors(k) {
                    if self.interior[n] && !seen[n] {
                        seen[n] = true;
                        queue.push_back(n);
                    }
                }
            }
        }
        components
    }

    /// Cell containing the point nearest to `(x, y)`.
    pub fn nearest_cell(&self, x: f64, y: f64) -> usize {
        let i = ((x / self.h).round() as i64 + self.cx as i64).clamp(0, self.nx as i64 - 1);
        let j = if self.dim == 1 {
            0
        } else {
            ((y / self.h).round() as i64 + self.cy as i64).clamp(0, self.ny as i64 - 1)
        };
        self.index(i as usize, j as usize)
    }
}

/// Rasterizes a catalog shape by the cell-centre membership test.
pub fn make_domain(spec: &ShapeSpec) -> Result<GridDomain> {
    let h = spec.h;
    check_positive("h", h)?;
    spec.shape.validate()?;
    if let Shape::Dumbbell {
        bridge_halfwidth, ..
    } = spec.shape
    {
        if 2.0 * bridge_halfwidth < h {
            return Err(Error::TooCoarse {
                h,
                detail: format!(
                    "bridge width {} is narrower than one cell",
                    2.0 * bridge_halfwidth
                ),
            });
        }
    }
    let (hx, hy) = spec.shape.half_extents();
    let half_cells = |e: f64| (e / h - 1e-9).ceil().max(0.0) as usize + 1;
    let (ax, ay) = (
        half_cells(hx),
        if spec.shape.dim() == 1 {
            0
        } else {
            half_cells(hy)
        },
    );
    let nx = 2 * ax + 1;
    let ny = 2 * ay + 1;
    let eps = 1e-9 * h;
    let mut mask = vec![false; nx * ny];
    for j in 0..ny {
        for i in 0..nx {
            let x = (i as i64 - ax as i64) as f64 * h;
            let y = (j as i64 - ay as i64) as f64 * h;
            mask[j * nx + i] = spec.shape.contains(x, y, eps);
        }
    }
    let mut domain = GridDomain::from_mask(nx, ny, spec.shape.dim(), h, mask, spec.shape.name())?;
    domain.shape = Some(spec.shape.clone());
    if let Shape::Dumbbell { .. } = spec.shape {
        for (x, y) in spec.shape.bulb_centers() {
            if !domain.is_interior(domain.nearest_cell(x, y)) {
                return Err(Error::TooCoarse {
                    h,
                    detail: "bulb centre is not an interior cell".into(),
                });
            }
        }
    }
    Ok(domain)
}

/// A grid function that vanishes on every non-interior cell.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    domain: Arc<GridDomain>,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(domain: Arc<GridDomain>) -> Self {
        let n = domain.len();
        ScalarField {
            domain,
            values: vec![0.0; n],
        }
    }

    /// Wraps raw values, forcing non-interior cells to 0.
    pub fn from_values(domain: Arc<GridDomain>, mut values: Vec<f64>) -> Result<Self> {
        if values.len() != domain.len() {
            return Err(Error::FieldMismatch(format!(
                "{} values for a grid of {} cells",
                values.len(),
                domain.len()
            )));
        }
        for (k, v) in values.iter_mut().enumerate() {
            if !domain.is_interior(k) {
                *v = 0.0;
            }
        }
        Ok(ScalarField { domain, values })
    }

    /// Evaluates `f(x, y)` at interior cell centres.
    pub fn from_fn(domain: Arc<GridDomain>, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = (0..domain.len())
            .map(|k| {
                if domain.is_interior(k) {
                    let (x, y) = domain.center(k);
                    f(x, y)
                } else {
                    0.0
                }
            })
            .collect();
        ScalarField { domain, values }
    }

    pub fn domain(&self) -> &Arc<GridDomain> {
        &self.domain
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn get(&self, k: usize) -> f64 {
        self.values[k]
    }
    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Sets interior cell values; writes to non-interior cells are ignored.
    pub fn set(&mut self, k: usize, v: f64) {
        if self.domain.is_interior(k) {
            self.values[k] = v;
        }
    }

    pub fn sup(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn min_interior(&self) -> f64 {
        self.domain
            .interior_cells()
            .iter()
            .map(|&k| self.values[k])
            .fold(f64::INFINITY, f64::min)
    }

    pub fn scaled(&self, c: f64) -> ScalarField {
        ScalarField {
            domain: self.domain.clone(),
            values: self.values.iter().map(|v| v * c).collect(),
        }
    }

    /// Keeps values where `keep(x, y)` holds, zeroes the rest.
    pub fn masked(&self, keep: impl Fn(f64, f64) -> bool) -> ScalarField {
        let values = (0..self.values.len())
            .map(|k| {
                let (x, y) = self.domain.center(k);
                if keep(x, y) {
                    self.values[k]
                } else {
                    0.0
                }
            })
            .collect();
        ScalarField {
            domain: self.domain.clone(),
            values,
        }
    }

    /// `sup |self - other|` over all cells.
    pub fn sup_diff(&self, other: &ScalarField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
    }

    /// `min (self - other)` over interior cells.
    pub fn min_diff(&self, other: &ScalarField) -> f64 {
        self.domain
            .interior_cells()
            .iter()
            .map(|&k| self.values[k] - other.values[k])
            .fold(f64::INFINITY, f64::min)
    }

    /// `max (self - other)` over interior cells.
    pub fn max_diff(&self, other: &ScalarField) -> f64 {
        self.domain
            .interior_cells()
            .iter()
            .map(|&k| self.values[k] - other.values[k])
            .fold(f64::NEG_INFINITY, f64::max)
    }
}
