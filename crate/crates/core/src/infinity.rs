//! Monotone fixed-point scheme for `min{-Δ∞v, |∇v| - λ v^ℓ} = 0` with zero
//! boundary values, the `ℓ = 1` eigenvalue problem, and the `ℓ ↗ 1`
//! continuation.
//!
//! At an interior cell with stencil neighbours `u_j` at distances `ρ_j h`,
//! the two branches read
//!
//! * `A = max_j min_k (ρ_k u_j + ρ_j u_k) / (ρ_j + ρ_k)`, the value at which
//!   the steepest ascent and steepest descent slopes balance (discrete
//!   `-Δ∞v = 0`), and
//! * `B = min_j (u_j + ρ_j h λ v^ℓ)`, the upwind eikonal value with the
//!   reaction lagged at the previous iterate.
//!
//! `v ≥ A` is the supersolution side of the first operand and `v ≥ B` the
//! one of the second, so the equation `min{..} = 0` holds when
//! `v = max(A, B)`. Both branches are nondecreasing in every argument, which
//! makes one Jacobi sweep order preserving.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::distance::{distance_transform, inradius};
use crate::error::{check_positive, Error, Result};
use crate::exec::{self, Execution};
use crate::grid::{GridDomain, ScalarField};

/// Lattice neighbourhood used by the scheme: primitive directions with
/// `max(|a|, |b|) ≤ width`, listed so that entry `j + m/2` is the antipode
/// of entry `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct Stencil {
    width: usize,
    dirs: Vec<(i64, i64)>,
    lens: Vec<f64>,
}

impl Stencil {
    pub fn new(dim: usize, width: usize) -> Result<Self> {
        if !(1..=2).contains(&width) {
            return Err(Error::InvalidParameter {
                name: "width",
                value: width as f64,
                reason: "stencil width must be 1 or 2".into(),
            });
        }
        let half: Vec<(i64, i64)> = if dim == 1 {
            vec![(1, 0)]
        } else if width == 1 {
            vec![(1, 0), (0, 1), (1, 1), (1, -1)]
        } else {
            vec![
                (1, 0),
                (0, 1),
                (1, 1),
                (1, -1),
                (2, 1),
                (1, 2),
                (2, -1),
                (1, -2),
            ]
        };
        let mut dirs = half.clone();
        dirs.extend(half.iter().map(|&(a, b)| (-a, -b)));
        let lens = dirs
            .iter()
            .map(|&(a, b)| ((a * a + b * b) as f64).sqrt())
            .collect();
        Ok(Stencil { width, dirs, lens })
    }

    pub fn width(&self) -> usize {
        self.width
    }
    pub fn directions(&self) -> &[(i64, i64)] {
        &self.dirs
    }
    /// Direction lengths in cell units.
    pub fn lengths(&self) -> &[f64] {
        &self.lens
    }
    pub fn len(&self) -> usize {
        self.dirs.len()
    }
    pub fn is_empty(&self) -> bool {
        self.dirs.is_empty()
    }
}

pub const DEFAULT_WIDTH: usize = 1;

/// Neighbour tables of one stencil on one domain, built once per solve.
/// Off-grid neighbours point at slot `domain.len()`, which always holds 0.
struct Neighbors {
    m: usize,
    lens: Vec<f64>,
    wt: Vec<f64>,
    cells: Vec<usize>,
    idx: Vec<usize>,
}

impl Neighbors {
    fn new(domain: &GridDomain, stencil: &Stencil) -> Self {
        let m = stencil.len();
        let cells = domain.interior_cells().to_vec();
        let pad = domain.len();
        let mut idx = Vec::with_capacity(cells.len() * m);
        for &k in &cells {
            for &(a, b) in stencil.directions() {
                idx.push(domain.offset(k, a, b).unwrap_or(pad));
            }
        }
        let lens = stencil.lengths();
        let mut wt = Vec::with_capacity(2 * m * m);
        for &dj in lens {
            for &dk in lens {
                wt.push(dk / (dj + dk));
                wt.push(dj / (dj + dk));
            }
        }
        Neighbors {
            m,
            lens: lens.to_vec(),
            wt,
            cells,
            idx,
        }
    }

    fn of(&self, c: usize) -> &[usize] {
        &self.idx[c * self.m..(c + 1) * self.m]
    }
}

/// `(A, B)` at one cell from its neighbour values. `B` is returned without
/// the reaction term: `min_j (u_j + ρ_j r)` needs `r = h λ v^ℓ`.
/// `wt[2 (j m + k)..]` holds `(ρ_k, ρ_j) / (ρ_j + ρ_k)`. The pair value is
/// formed as a positive combination so that it stays nondecreasing in
/// `u_j` and `u_k` after rounding.
#[inline]
fn branches(
    u: &[f64],
    nb: &[usize],
    lens: &[f64],
    wt: &[f64],
    r: f64,
    buf: &mut [f64],
) -> (f64, f64) {
    let m = nb.len();
    let mut b = f64::INFINITY;
    for j in 0..m {
        let uj = u[nb[j]];
        buf[j] = uj;
        b = b.min(uj + lens[j] * r);
    }
    let mut a = f64::NEG_INFINITY;
    for j in 0..m {
        let uj = buf[j];
        // min_k w_jk <= w_jj = u_j, so this j cannot raise `a`
        if uj <= a {
            continue;
        }
        let row = &wt[2 * j * m..2 * (j + 1) * m];
        let mut lo = uj;
        for k in 0..m {
            let w = row[2 * k] * uj + row[2 * k + 1] * buf[k];
            if w < lo {
                lo = w;
                if lo <= a {
                    break;
                }
            }
        }
        a = a.max(lo);
    }
    (a, b)
}

/// Rescaled stencil extrema `(max_nb, min_nb)`:
/// `v + max_j (u_j - v)/ρ_j` and `v + min_j (u_j - v)/ρ_j`, the values a
/// unit step away along the steepest ascent and descent. For the
/// axis-only stencil they are the plain neighbour extrema, and the discrete
/// `-Δ∞v` is `(2v - max_nb - min_nb) / h^2`.
pub fn stencil_extrema(v: &ScalarField, cell: usize, width: usize) -> Result<(f64, f64)> {
    let d = v.domain();
    if !d.is_interior(cell) {
        return Err(Error::InvalidParameter {
            name: "cell",
            value: cell as f64,
            reason: "not an interior cell".into(),
        });
    }
    let st = Stencil::new(d.dim(), width)?;
    Ok(extrema_at(v, cell, &st))
}

fn extrema_at(v: &ScalarField, cell: usize, st: &Stencil) -> (f64, f64) {
    let d = v.domain();
    let vc = v.get(cell);
    let (mut hi, mut lo) = (f64::NEG_INFINITY, f64::INFINITY);
    for (&(a, b), &len) in st.directions().iter().zip(st.lengths()) {
        let uj = d.offset(cell, a, b).map_or(0.0, |n| v.get(n));
        let slope = (uj - vc) / len;
        hi = hi.max(slope);
        lo = lo.min(slope);
    }
    (vc + hi, vc + lo)
}

/// `(v - min_nb) / h` over the width-1 stencil: the downwind slope.
pub fn gradient_norm_upwind(v: &ScalarField, cell: usize) -> Result<f64> {
    let (_, lo) = stencil_extrema(v, cell, 1)?;
    Ok((v.get(cell) - lo) / v.domain().h())
}

/// Problem statement for the sublinear (or, with `ℓ = 1`, eigenvalue)
/// equation on one domain.
#[derive(Debug, Clone)]
pub struct ConcaveProblem {
    pub domain: Arc<GridDomain>,
    pub ell: f64,
    pub lambda: f64,
    pub width: usize,
}

impl ConcaveProblem {
    /// `λ` defaults to `1 / R_h`, the grid inradius.
    pub fn new(domain: Arc<GridDomain>, ell: f64) -> Result<Self> {
        let lambda = 1.0 / inradius(&distance_transform(&domain))?;
        Self::with_lambda(domain, ell, lambda)
    }

    pub fn with_lambda(domain: Arc<GridDomain>, ell: f64, lambda: f64) -> Result<Self> {
        let p = ConcaveProblem {
            domain,
            ell,
            lambda,
            width: DEFAULT_WIDTH,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn width(mut self, width: usize) -> Result<Self> {
        Stencil::new(self.domain.dim(), width)?;
        self.width = width;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.ell > 0.0 && self.ell <= 1.0) {
            return Err(Error::InvalidParameter {
                name: "ell",
                value: self.ell,
                reason: "must lie in (0, 1]".into(),
            });
        }
        check_positive("lambda", self.lambda)?;
        Stencil::new(self.domain.dim(), self.width)?;
        Ok(())
    }

    fn stencil(&self) -> Stencil {
        Stencil::new(self.domain.dim(), self.width).expect("validated")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub iterations: usize,
    /// Sup-norm of the last update.
    pub final_change: f64,
    /// Sup-norm residual of the discrete equation, see [`residual`].
    pub residual: f64,
    pub converged: bool,
    pub sup_norm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    /// Stop once the sup-norm change of a sweep drops below this.
    pub tol: f64,
    pub max_sweeps: usize,
    /// Required residual for `converged`; `None` means `10 h`.
    pub residual_tol: Option<f64>,
    pub exec: Execution,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tol: 1e-7,
            max_sweeps: 200_000,
            residual_tol: None,
            exec: Execution::default(),
        }
    }
}

impl SolveOptions {
    pub fn new(tol: f64, max_sweeps: usize) -> Self {
        SolveOptions {
            tol,
            max_sweeps,
            ..SolveOptions::default()
        }
    }

    fn residual_tol(&self, h: f64) -> f64 {
        self.residual_tol.unwrap_or(10.0 * h)
    }
}

/// Jacobi sweep state: the neighbour tables plus a padded copy of the
/// previous iterate.
struct Sweeper {
    nb: Neighbors,
    h: f64,
    ell: f64,
    lambda: f64,
    prev: Vec<f64>,
    next: Vec<f64>,
}

impl Sweeper {
    fn new(problem: &ConcaveProblem, v: &[f64]) -> Self {
        let nb = Neighbors::new(&problem.domain, &problem.stencil());
        let mut prev = v.to_vec();
        prev.push(0.0);
        let next = vec![0.0; nb.cells.len()];
        Sweeper {
            nb,
            h: problem.domain.h(),
            ell: problem.ell,
            lambda: problem.lambda,
            prev,
            next,
        }
    }

    /// One sweep; returns the sup-norm change.
    fn sweep(&mut self, exec: Execution) -> f64 {
        let (nb, prev) = (&self.nb, &self.prev);
        let (hl, ell) = (self.h * self.lambda, self.ell);
        let m = nb.m;
        exec::fill(exec, &mut self.next, |c| {
            let k = nb.cells[c];
            let r = if ell == 1.0 {
                hl * prev[k]
            } else {
                hl * prev[k].powf(ell)
            };
            let mut buf = [0.0; 16];
            let (a, b) = branches(prev, nb.of(c), &nb.lens, &nb.wt, r, &mut buf[..m]);
            a.max(b)
        });
        let mut change = 0.0f64;
        for (c, &k) in self.nb.cells.iter().enumerate() {
            change = change.max((self.next[c] - self.prev[k]).abs());
            self.prev[k] = self.next[c];
        }
        change
    }

    fn scale(&mut self, c: f64) {
        for &k in &self.nb.cells {
            self.prev[k] *= c;
        }
    }

    fn sup(&self) -> f64 {
        self.nb
            .cells
            .iter()
            .fold(0.0f64, |m, &k| m.max(self.prev[k].abs()))
    }

    fn values(&self) -> Vec<f64> {
        self.prev[..self.prev.len() - 1].to_vec()
    }
}

fn check_field(problem: &ConcaveProblem, v: &ScalarField) -> Result<()> {
    if v.domain().len() != problem.domain.len() || v.domain().nx() != problem.domain.nx() {
        return Err(Error::FieldMismatch(
            "field and problem live on different grids".into(),
        ));
    }
    Ok(())
}

/// One Jacobi sweep of the scheme: every interior cell takes
/// `max(A, B)` computed from `v`; non-interior cells stay 0.
pub fn concave_update(v: &ScalarField, problem: &ConcaveProblem) -> Result<ScalarField> {
    concave_update_with(v, problem, Execution::default())
}

pub fn concave_update_with(
    v: &ScalarField,
    problem: &ConcaveProblem,
    exec: Execution,
) -> Result<ScalarField> {
    problem.validate()?;
    check_field(problem, v)?;
    let mut sw = Sweeper::new(problem, v.values());
    sw.sweep(exec);
    ScalarField::from_values(problem.domain.clone(), sw.values())
}

/// `max_k |min((2v - max_nb - min_nb)/h, (v - min_nb)/h - λ v^ℓ)|` over
/// interior cells, with the extrema of [`stencil_extrema`] on the problem's
/// stencil. The first operand is the discrete `-Δ∞v` scaled by `h` so both
/// operands are slopes.
pub fn residual(field: &ScalarField, problem: &ConcaveProblem) -> Result<f64> {
    problem.validate()?;
    check_field(problem, field)?;
    let st = problem.stencil();
    let d = field.domain();
    let h = d.h();
    let cells = d.interior_cells();
    Ok(exec::max_over(Execution::default(), cells.len(), |c| {
        let k = cells[c];
        let v = field.get(k);
        let (hi, lo) = extrema_at(field, k, &st);
        let lap = (2.0 * v - hi - lo) / h;
        let eik = (v - lo) / h - problem.lambda * v.max(0.0).powf(problem.ell);
        lap.min(eik).abs()
    }))
}

/// The distance field scaled to sup 1.
pub fn distance_init(domain: &Arc<GridDomain>) -> ScalarField {
    let dist = distance_transform(domain).into_field();
    let s = dist.sup();
    dist.scaled(1.0 / s)
}

/// Iterates [`concave_update`] from `init` until the sup change drops below
/// `opts.tol`.
pub fn solve_concave(
    problem: &ConcaveProblem,
    init: &ScalarField,
    opts: &SolveOptions,
) -> Result<(ScalarField, SolveReport)> {
    problem.validate()?;
    check_field(problem, init)?;
    if problem.ell >= 1.0 {
        return Err(Error::InvalidParameter {
            name: "ell",
            value: problem.ell,
            reason: "the sublinear solver needs ell < 1; use solve_eigen_l1".into(),
        });
    }
    check_positive("tol", opts.tol)?;
    for &k in problem.domain.interior_cells() {
        let v = init.get(k);
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::NonPositiveInit { cell: k });
        }
    }
    let mut sw = Sweeper::new(problem, init.values());
    let mut change = f64::INFINITY;
    let mut iterations = 0;
    while iterations < opts.max_sweeps {
        change = sw.sweep(opts.exec);
        iterations += 1;
        if !change.is_finite() {
            return Err(Error::NonFinite("concave sweep"));
        }
        if change < opts.tol {
            break;
        }
    }
    finish(problem, sw, iterations, change, opts)
}

fn finish(
    problem: &ConcaveProblem,
    sw: Sweeper,
    iterations: usize,
    change: f64,
    opts: &SolveOptions,
) -> Result<(ScalarField, SolveReport)> {
    let field = ScalarField::from_values(problem.domain.clone(), sw.values())?;
    let res = residual(&field, problem)?;
    let report = SolveReport {
        iterations,
        final_change: change,
        residual: res,
        converged: change < opts.tol && res <= opts.residual_tol(problem.domain.h()),
        sup_norm: field.sup(),
    };
    Ok((field, report))
}

/// The `ℓ = 1` problem: the same sweep followed by rescaling to sup 1, so
/// the iteration moves along rays of the 1-homogeneous equation.
pub fn solve_eigen_l1(
    domain: &Arc<GridDomain>,
    lambda: f64,
    init: &ScalarField,
    opts: &SolveOptions,
) -> Result<(ScalarField, SolveReport)> {
    let problem = ConcaveProblem::with_lambda(domain.clone(), 1.0, lambda)?;
    solve_eigen_l1_problem(&problem, init, opts)
}

/// [`solve_eigen_l1`] with an explicit problem (for a non-default stencil).
pub fn solve_eigen_l1_problem(
    problem: &ConcaveProblem,
    init: &ScalarField,
    opts: &SolveOptions,
) -> Result<(ScalarField, SolveReport)> {
    problem.validate()?;
    check_field(problem, init)?;
    check_positive("tol", opts.tol)?;
    let mut problem = problem.clone();
    problem.ell = 1.0;
    if init.values().iter().any(|&v| v < 0.0 || !v.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "init",
            value: init.min_interior(),
            reason: "initial field must be finite and nonnegative".into(),
        });
    }
    let s0 = init.sup();
    if s0 == 0.0 {
        return Err(Error::ZeroField);
    }
    let mut sw = Sweeper::new(&problem, init.values());
    sw.scale(1.0 / s0);
    let mut change = f64::INFINITY;
    let mut iterations = 0;
    let mut before = sw.values();
    while iterations < opts.max_sweeps {
        sw.sweep(opts.exec);
        iterations += 1;
        let s = sw.sup();
        if s == 0.0 {
            return Err(Error::Collapsed { sweep: iterations });
        }
        if !s.is_finite() {
            return Err(Error::NonFinite("eigen sweep"));
        }
        sw.scale(1.0 / s);
        change = sw
            .nb
            .cells
            .iter()
            .fold(0.0f64, |m, &k| m.max((sw.prev[k] - before[k]).abs()));
        if change < opts.tol {
            break;
        }
        for &k in &sw.nb.cells {
            before[k] = sw.prev[k];
        }
    }
    finish(&problem, sw, iterations, change, opts)
}

/// Diagnostics of one stage of the `ℓ` continuation.
#[derive(Debug, Clone, Serialize)]
pub struct StageReport {
    pub ell: f64,
    pub report: SolveReport,
    /// `min (v_prev - v)` against the previous stage; `None` for the first.
    pub monotone_gap: Option<f64>,
    /// `sup |v - v_prev|`; `None` for the first stage.
    pub sup_change: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct MaximalOutcome {
    pub field: ScalarField,
    pub stages: Vec<StageReport>,
    /// Solutions for every `ℓ` of the schedule, in order.
    pub solutions: Vec<ScalarField>,
}

pub const DEFAULT_SCHEDULE: [f64; 5] = [0.3, 0.5, 0.7, 0.9, 0.95];

/// Solves the sublinear problem along an increasing `ℓ` schedule with warm
/// starts and returns the last solution as the maximal eigenfunction.
/// Fails if some stage exceeds its predecessor by more than `h` anywhere.
pub fn maximal_eigenfunction(
    domain: &Arc<GridDomain>,
    schedule: &[f64],
    opts: &SolveOptions,
) -> Result<MaximalOutcome> {
    let lambda = 1.0 / inradius(&distance_transform(domain))?;
    maximal_eigenfunction_with(domain, schedule, lambda, DEFAULT_WIDTH, opts)
}

pub fn maximal_eigenfunction_with(
    domain: &Arc<GridDomain>,
    schedule: &[f64],
    lambda: f64,
    width: usize,
    opts: &SolveOptions,
) -> Result<MaximalOutcome> {
    let out = continuation(domain, schedule, lambda, width, opts)?;
    let h = domain.h();
    for (i, st) in out.stages.iter().enumerate().skip(1) {
        if let Some(g) = st.monotone_gap {
            if g < -h {
                return Err(Error::MonotonicityViolated {
                    l_lo: schedule[i - 1],
                    l_hi: st.ell,
                    gap: g,
                    slack: h,
                });
            }
        }
    }
    Ok(out)
}

/// The warm-started `ℓ` continuation without the monotonicity check.
pub fn continuation(
    domain: &Arc<GridDomain>,
    schedule: &[f64],
    lambda: f64,
    width: usize,
    opts: &SolveOptions,
) -> Result<MaximalOutcome> {
    if schedule.is_empty() {
        return Err(Error::InvalidParameter {
            name: "schedule",
            value: 0.0,
            reason: "empty schedule".into(),
        });
    }
    for w in schedule.windows(2) {
        if w[1] <= w[0] {
            return Err(Error::InvalidParameter {
                name: "schedule",
                value: w[1],
                reason: "entries must be strictly increasing".into(),
            });
        }
    }
    let mut init = distance_init(domain);
    let mut stages = Vec::with_capacity(schedule.len());
    let mut solutions: Vec<ScalarField> = Vec::with_capacity(schedule.len());
    for &ell in schedule {
        let problem = ConcaveProblem::with_lambda(domain.clone(), ell, lambda)?.width(width)?;
        let (v, report) = solve_concave(&problem, &init, opts)?;
        let (gap, change) = match solutions.last() {
            Some(prev) => (Some(prev.min_diff(&v)), Some(prev.sup_diff(&v))),
            None => (None, None),
        };
        stages.push(StageReport {
            ell,
            report,
            monotone_gap: gap,
            sup_change: change,
        });
        init = v.clone();
        solutions.push(v);
    }
    let field = solutions.last().cloned().expect("nonempty schedule");
    Ok(MaximalOutcome {
        field,
        stages,
        solutions,
    })
}
