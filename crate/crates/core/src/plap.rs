//! Discrete Rayleigh quotients for the `(p, q)` eigenvalue family and their
//! minimization by projected gradient descent.
//!
//! The energy uses forward differences on every grid cell, so the jump from
//! a padding cell into the domain is counted; with zero boundary values this
//! is the usual Dirichlet energy. All `p`-th powers are evaluated relative to
//! the largest term, which keeps `p ~ 100` finite.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::distance::distance_transform;
use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::grid::{GridDomain, ScalarField};

/// Exponents of one member of the family: minimize `int |grad u|^p` subject
/// to `||u||_q = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PQParams {
    pub p: f64,
    pub q: f64,
    /// Intended limit ratio `q / p`; bookkeeping only.
    pub ell_target: f64,
}

impl PQParams {
    pub fn new(p: f64, q: f64) -> Result<Self> {
        let params = PQParams {
            p,
            q,
            ell_target: q / p,
        };
        params.validate()?;
        Ok(params)
    }

    /// `q = ceil(ell * p)`, clamped into `(1, p]`.
    pub fn from_ratio(ell: f64, p: f64) -> Result<Self> {
        if !(ell > 0.0 && ell <= 1.0) {
            return Err(Error::InvalidParameter {
                name: "ell",
                value: ell,
                reason: "must lie in (0, 1]".into(),
            });
        }
        let q = (ell * p - 1e-9).ceil().max(2.0).min(p);
        let mut params = PQParams::new(p, q)?;
        params.ell_target = ell;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p.is_finite() && self.p >= 2.0) {
            return Err(Error::InvalidParameter {
                name: "p",
                value: self.p,
                reason: "must be finite and >= 2".into(),
            });
        }
        if !(self.q > 1.0 && self.q <= self.p) {
            return Err(Error::InvalidParameter {
                name: "q",
                value: self.q,
                reason: format!("must lie in (1, p] with p = {}", self.p),
            });
        }
        Ok(())
    }
}

/// Default stopping tolerance on the projected gradient for exponent `p`.
pub fn default_tolerance(p: f64) -> f64 {
    if p <= 20.0 {
        1e-8
    } else if p < 40.0 {
        1e-7
    } else {
        1e-6
    }
}

pub const DEFAULT_MAX_ITER: usize = 50_000;

/// Natural log of `(sum_i |u_i|^q h^n)^(1/q)`; `-inf` for the zero field.
pub fn log_lq_norm(u: &ScalarField, q: f64) -> f64 {
    let d = u.domain();
    let m = u.sup();
    if m == 0.0 {
        return f64::NEG_INFINITY;
    }
    let s: f64 = d
        .interior_cells()
        .iter()
        .map(|&k| (u.get(k).abs() / m).powf(q))
        .sum();
    m.ln() + (s.ln() + d.dim() as f64 * d.h().ln()) / q
}

/// Discrete `L^q` norm over interior cells.
pub fn lq_norm(u: &ScalarField, q: f64) -> f64 {
    log_lq_norm(u, q).exp()
}

/// Squared forward-difference gradient at every cell. Neighbours beyond the
/// grid edge count as 0; only non-interior cells sit there, so the
/// difference vanishes.
fn grad_sq(d: &GridDomain, u: &[f64], exec: Execution, out: &mut [f64]) {
    let (nx, ny, h) = (d.nx(), d.ny(), d.h());
    let two_d = d.dim() == 2;
    exec::fill(exec, out, |k| {
        let (i, j) = (k % nx, k / nx);
        let c = u[k];
        let e = if i + 1 < nx { u[k + 1] } else { 0.0 };
        let a = (e - c) / h;
        let mut s = a * a;
        if two_d {
            let n = if j + 1 < ny { u[k + nx] } else { 0.0 };
            let b = (n - c) / h;
            s += b * b;
        }
        s
    });
}

/// `max_k s_k` and `sum_k (s_k / max)^(p/2)`.
fn scaled_power_sum(s: &[f64], p: f64) -> (f64, f64) {
    let smax = s.iter().copied().fold(0.0f64, f64::max);
    if smax == 0.0 {
        return (0.0, 0.0);
    }
    let half = 0.5 * p;
    let total = s
        .iter()
        .filter(|&&v| v > 0.0)
        .map(|&v| (v / smax).powf(half))
        .sum();
    (smax, total)
}

/// Natural log of the discrete energy `sum_cells |grad_h u|^p h^n`;
/// `-inf` for the zero field.
pub fn p_energy(u: &ScalarField, p: f64) -> f64 {
    p_energy_with(u, p, Execution::default())
}

pub fn p_energy_with(u: &ScalarField, p: f64, exec: Execution) -> f64 {
    let d = u.domain();
    let mut s = vec![0.0; d.len()];
    grad_sq(d, u.values(), exec, &mut s);
    let (smax, total) = scaled_power_sum(&s, p);
    if smax == 0.0 {
        return f64::NEG_INFINITY;
    }
    0.5 * p * smax.ln() + total.ln() + d.dim() as f64 * d.h().ln()
}

/// Natural log of `energy / ||u||_q^p`. Scale invariant in `u`.
pub fn log_rayleigh_pq(u: &ScalarField, params: &PQParams) -> Result<f64> {
    params.validate()?;
    if u.sup() == 0.0 {
        return Err(Error::ZeroField);
    }
    Ok(p_energy(u, params.p) - params.p * log_lq_norm(u, params.q))
}

/// The Rayleigh quotient itself; may overflow to `inf` for large `p` where
/// [`log_rayleigh_pq`] stays finite.
pub fn rayleigh_pq(u: &ScalarField, params: &PQParams) -> Result<f64> {
    log_rayleigh_pq(u, params).map(f64::exp)
}

/// `ln R(u)` together with its partial derivatives `∂ ln R / ∂u_k`
/// (zero off the interior).
pub fn log_rayleigh_gradient(u: &ScalarField, params: &PQParams) -> Result<(f64, ScalarField)> {
    params.validate()?;
    if u.sup() == 0.0 {
        return Err(Error::ZeroField);
    }
    let d = u.domain().clone();
    let mut ev = Evaluator::new(d.clone(), params, Execution::default());
    let mut g = vec![0.0; d.len()];
    let f = ev.eval(u.values(), &mut g);
    if !f.is_finite() {
        return Err(Error::NonFinite("log_rayleigh_gradient"));
    }
    let vol = d.cell_volume();
    g.iter_mut().for_each(|v| *v *= vol);
    Ok((f, ScalarField::from_values(d, g)?))
}

/// Workspace for repeated quotient and gradient evaluations on one domain.
/// After [`Evaluator::eval`] it holds the power sums of that point, which
/// [`Evaluator::delta`] reuses.
struct Evaluator {
    domain: Arc<GridDomain>,
    p: f64,
    q: f64,
    exec: Execution,
    s: Vec<f64>,
    /// `(s / smax)^(p/2)` per cell
    w: Vec<f64>,
    smax: f64,
    total: f64,
    m: f64,
    nq: f64,
    fx: Vec<f64>,
    fy: Vec<f64>,
    buf: Vec<f64>,
    /// diagonal of the energy Hessian in the `L^2(h^n)` metric
    diag: Vec<f64>,
}

impl Evaluator {
    fn new(domain: Arc<GridDomain>, params: &PQParams, exec: Execution) -> Self {
        let n = domain.len();
        Evaluator {
            domain,
            p: params.p,
            q: params.q,
            exec,
            s: vec![0.0; n],
            w: vec![0.0; n],
            smax: 0.0,
            total: 0.0,
            m: 0.0,
            nq: 0.0,
            fx: vec![0.0; n],
            fy: vec![0.0; n],
            buf: vec![0.0; n],
            diag: vec![0.0; n],
        }
    }

    /// `ln R(u)` and its `L^2(h^n)` Riesz gradient, written into `grad`
    /// (zero off the interior). NaN for a field with no gradient.
    fn eval(&mut self, u: &[f64], grad: &mut [f64]) -> f64 {
        let d = &*self.domain;
        let (nx, ny, h, p, q) = (d.nx(), d.ny(), d.h(), self.p, self.q);
        let two_d = d.dim() == 2;
        grad_sq(d, u, self.exec, &mut self.s);
        let smax = self.s.iter().copied().fold(0.0f64, f64::max);
        let m = d
            .interior_cells()
            .iter()
            .fold(0.0f64, |m, &k| m.max(u[k].abs()));
        if smax == 0.0 || m == 0.0 {
            grad.iter_mut().for_each(|g| *g = 0.0);
            return f64::NAN;
        }
        let half = 0.5 * p;
        let s = &self.s;
        exec::fill(self.exec, &mut self.w, |k| {
            if s[k] > 0.0 {
                (s[k] / smax).powf(half)
            } else {
                0.0
            }
        });
        let total: f64 = self.w.iter().sum();
        let nq: f64 = d
            .interior_cells()
            .iter()
            .map(|&k| (u[k].abs() / m).powf(q))
            .sum();
        (self.smax, self.total, self.m, self.nq) = (smax, total, m, nq);
        let dim = d.dim() as f64;
        let log_e = half * smax.ln() + total.ln() + dim * h.ln();
        let log_n = m.ln() + (nq.ln() + dim * h.ln()) / q;

        // flux_c = p |g_c|^(p-2) g_c h^n / (E h), split per axis
        let w = &self.w;
        let coef = p / (total * h);
        exec::fill(self.exec, &mut self.fx, |k| {
            if s[k] == 0.0 {
                return 0.0;
            }
            let e = if k % nx + 1 < nx { u[k + 1] } else { 0.0 };
            coef * w[k] / s[k] * (e - u[k]) / h
        });
        if two_d {
            exec::fill(self.exec, &mut self.fy, |k| {
                if s[k] == 0.0 {
                    return 0.0;
                }
                let n = if k / nx + 1 < ny { u[k + nx] } else { 0.0 };
                coef * w[k] / s[k] * (n - u[k]) / h
            });
        }
        let (fx, fy) = (&self.fx, &self.fy);
        let vol = d.cell_volume();
        let mask = d.interior_mask();
        let norm_coef = p / (m * nq);
        exec::fill(self.exec, grad, |k| {
            if !mask[k] {
                return 0.0;
            }
            // interior cells always have west and south neighbours
            let mut de = fx[k - 1] - fx[k];
            if two_d {
                de += fy[k - nx] - fy[k];
            }
            let dn = norm_coef * (u[k].abs() / m).powf(q - 1.0) * u[k].signum();
            (de - dn) / vol
        });
        // edge curvature p (p - 1) |g|^(p-2) / h^2, normalized by E
        let curv = p * (p - 1.0) / (total * h * h * vol);
        let w_over_s = |c: usize| if s[c] > 0.0 { w[c] / s[c] } else { 0.0 };
        let axes = if two_d { 2.0 } else { 1.0 };
        exec::fill(self.exec, &mut self.diag, |k| {
            if !mask[k] {
                return 0.0;
            }
            let mut c = w_over_s(k - 1) + axes * w_over_s(k);
            if two_d {
                c += w_over_s(k - nx);
            }
            curv * c
        });
        let mean = self.diag.iter().sum::<f64>() / d.interior_cells().len() as f64;
        let floor = 1e-3 * mean;
        self.diag.iter_mut().for_each(|v| *v = v.max(floor));
        log_e - p * log_n
    }

    /// `ln R(u + du) - ln R(u)` for the `u` of the last [`Evaluator::eval`],
    /// summed from per-cell increments so that no two nearly equal totals
    /// are subtracted.
    fn delta(&mut self, u: &[f64], du: &[f64]) -> f64 {
        let d = &*self.domain;
        let (nx, ny, h, p, q) = (d.nx(), d.ny(), d.h(), self.p, self.q);
        let two_d = d.dim() == 2;
        let half = 0.5 * p;
        let (s, w, smax) = (&self.s, &self.w, self.smax);
        exec::fill(self.exec, &mut self.buf, |k| {
            let east = k % nx + 1 < nx;
            let (e, de) = if east {
                (u[k + 1], du[k + 1])
            } else {
                (0.0, 0.0)
            };
            let a = (e - u[k]) / h;
            let da = (de - du[k]) / h;
            let mut ds = da * (2.0 * a + da);
            if two_d {
                let north = k / nx + 1 < ny;
                let (n, dn) = if north {
                    (u[k + nx], du[k + nx])
                } else {
                    (0.0, 0.0)
                };
                let b = (n - u[k]) / h;
                let db = (dn - du[k]) / h;
                ds += db * (2.0 * b + db);
            }
            if ds == 0.0 {
                0.0
            } else if s[k] > 0.0 {
                w[k] * (half * (ds / s[k]).max(-1.0).ln_1p()).exp_m1()
            } else {
                (ds / smax).powf(half)
            }
        });
        let de: f64 = self.buf.iter().sum::<f64>() / self.total;
        let m = self.m;
        let mut dn = 0.0;
        for &k in d.interior_cells() {
            let (uk, dk) = (u[k].abs(), du[k]);
            if dk == 0.0 {
                continue;
            }
            dn += if uk > 0.0 {
                (uk / m).powf(q) * (q * (dk / uk).max(-1.0).ln_1p()).exp_m1()
            } else {
                (dk.abs() / m).powf(q)
            };
        }
        de.ln_1p() - p / q * (dn / self.nq).ln_1p()
    }
}

/// Outcome of one minimization.
#[derive(Debug, Clone, Serialize)]
pub struct EigenResult {
    pub params: PQParams,
    /// `ln Lambda_{p,q}`; the quotient itself overflows for large `p`.
    pub log_lambda: f64,
    /// `Lambda_{p,q}^(1/p)`.
    pub lambda_root: f64,
    #[serde(skip)]
    pub field: ScalarField,
    pub iterations: usize,
    /// `L^2` norm of the projected gradient at the returned field.
    pub grad_norm: f64,
    pub converged: bool,
    /// `ln R` after every accepted step, when requested.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub trace: Vec<f64>,
}

impl EigenResult {
    pub fn lambda_pq(&self) -> f64 {
        self.log_lambda.exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinimizeOptions {
    /// Projected-gradient tolerance; `None` picks [`default_tolerance`].
    pub tol: Option<f64>,
    pub max_iter: usize,
    pub exec: Execution,
    /// Scale the gradient by the diagonal of the energy Hessian.
    pub precondition: bool,
    pub record_trace: bool,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        MinimizeOptions {
            tol: None,
            max_iter: DEFAULT_MAX_ITER,
            exec: Execution::default(),
            precondition: true,
            record_trace: false,
        }
    }
}

/// The distance field scaled to unit `L^q` norm.
pub fn distance_init(domain: &Arc<GridDomain>, q: f64) -> ScalarField {
    let dist = distance_transform(domain).into_field();
    let n = lq_norm(&dist, q);
    dist.scaled(1.0 / n)
}

/// Minimizes the quotient starting from the normalized distance field.
pub fn minimize_pq(
    domain: &Arc<GridDomain>,
    params: PQParams,
    tol: f64,
    max_iter: usize,
) -> Result<EigenResult> {
    let opts = MinimizeOptions {
        tol: Some(tol),
        max_iter,
        ..MinimizeOptions::default()
    };
    minimize_pq_from(&distance_init(domain, params.q), params, &opts)
}

/// Projected gradient descent on the nonnegative part of the `q`-sphere.
///
/// Steps start from the Barzilai-Borwein length and are halved until the
/// quotient decreases sufficiently (Armijo). The decrease is evaluated
/// incrementally, so the test stays meaningful when it is far below the
/// rounding level of `ln R` itself.
pub fn minimize_pq_from(
    init: &ScalarField,
    params: PQParams,
    opts: &MinimizeOptions,
) -> Result<EigenResult> {
    params.validate()?;
    let tol = opts.tol.unwrap_or_else(|| default_tolerance(params.p));
    crate::error::check_positive("tol", tol)?;
    let domain = init.domain().clone();
    let d = &*domain;
    let mask = d.interior_mask();
    let vol = d.cell_volume();
    let n = d.len();

    let mut u: Vec<f64> = init.values().iter().map(|v| v.max(0.0)).collect();
    if u.iter().all(|&v| v == 0.0) {
        return Err(Error::ZeroField);
    }
    normalize(&mut u, &domain, params.q);

    let mut ev = Evaluator::new(domain.clone(), &params, opts.exec);
    let mut g = vec![0.0; n];
    let mut f = ev.eval(&u, &mut g);
    if !f.is_finite() {
        return Err(Error::NonFinite("initial Rayleigh quotient"));
    }
    let mut trace = Vec::new();
    if opts.record_trace {
        trace.push(f);
    }

    let mut trial = vec![0.0; n];
    let mut du = vec![0.0; n];
    let mut g_trial = vec![0.0; n];
    let mut metric = vec![1.0; n];
    if opts.precondition {
        metric.copy_from_slice(&ev.diag);
    }
    let mut step = if opts.precondition {
        1.0
    } else {
        d.h() * d.h() / params.p
    };
    let mut iterations = 0;
    let mut gnorm = projected_norm(&u, &g, mask, vol);
    let mut converged = gnorm < tol;
    const SIGMA: f64 = 1e-4;

    while !converged && iterations < opts.max_iter {
        let mut t = step;
        let mut accepted = false;
        for _ in 0..80 {
            let mut dec = 0.0;
            let mut alive = false;
            for k in 0..n {
                du[k] = if mask[k] {
                    (-t * g[k] / metric[k]).max(-u[k])
                } else {
                    0.0
                };
                dec -= vol * g[k] * du[k];
                alive |= u[k] + du[k] > 0.0;
            }
            if !alive {
                t *= 0.5;
                continue;
            }
            let df = ev.delta(&u, &du);
            if df.is_nan() {
                return Err(Error::NonFinite("line search"));
            }
            if df <= -SIGMA * dec {
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
        for k in 0..n {
            trial[k] = u[k] + du[k];
        }
        normalize(&mut trial, &domain, params.q);
        let f_new = ev.eval(&trial, &mut g_trial);
        if !f_new.is_finite() {
            return Err(Error::NonFinite("line search"));
        }
        if opts.precondition {
            metric.copy_from_slice(&ev.diag);
        }

        let (mut ss, mut sy) = (0.0, 0.0);
        for k in 0..n {
            let s = trial[k] - u[k];
            ss += vol * s * s * metric[k];
            sy += vol * s * (g_trial[k] - g[k]);
        }
        step = if sy > 0.0 && ss > 0.0 {
            (ss / sy).clamp(1e-14, 1e6)
        } else {
            (2.0 * t).min(1e6)
        };
        std::mem::swap(&mut u, &mut trial);
        std::mem::swap(&mut g, &mut g_trial);
        f = f_new;
        iterations += 1;
        if opts.record_trace {
            trace.push(f);
        }
        gnorm = projected_norm(&u, &g, mask, vol);
        converged = gnorm < tol;
    }

    let field = ScalarField::from_values(domain, u)?;
    Ok(EigenResult {
        params,
        log_lambda: f,
        lambda_root: (f / params.p).exp(),
        field,
        iterations,
        grad_norm: gnorm,
        converged,
        trace,
    })
}

/// Rescales the interior values to unit `L^q` norm.
fn normalize(u: &mut [f64], domain: &GridDomain, q: f64) {
    let m = u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if m == 0.0 {
        return;
    }
    let s: f64 = domain
        .interior_cells()
        .iter()
        .map(|&k| (u[k].abs() / m).powf(q))
        .sum();
    let log_n = m.ln() + (s.ln() + domain.dim() as f64 * domain.h().ln()) / q;
    let c = (-log_n).exp();
    u.iter_mut().for_each(|v| *v *= c);
}

/// Gradient with the components that push active constraints `u = 0`
/// further negative removed.
fn projected_norm(u: &[f64], g: &[f64], mask: &[bool], vol: f64) -> f64 {
    let mut s = 0.0;
    for k in 0..u.len() {
        if !mask[k] {
            continue;
        }
        let gk = if u[k] > 0.0 { g[k] } else { g[k].min(0.0) };
        s += vol * gk * gk;
    }
    s.sqrt()
}

/// One line of a sweep.
#[derive(Debug, Clone)]
pub struct SweepEntry {
    pub params: PQParams,
    pub outcome: Result<EigenResult>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SweepRow {
    pub p: f64,
    pub q: f64,
    pub lambda_root: f64,
    pub iterations: usize,
    pub grad_norm: f64,
    pub converged: bool,
}

#[derive(Debug, Clone)]
pub struct SweepTable {
    pub ell: f64,
    pub entries: Vec<SweepEntry>,
}

impl SweepTable {
    /// Rows for every entry that produced a result.
    pub fn rows(&self) -> Vec<SweepRow> {
        self.entries
            .iter()
            .filter_map(|e| e.outcome.as_ref().ok())
            .map(|r| SweepRow {
                p: r.params.p,
                q: r.params.q,
                lambda_root: r.lambda_root,
                iterations: r.iterations,
                grad_norm: r.grad_norm,
                converged: r.converged,
            })
            .collect()
    }

    pub fn results(&self) -> impl Iterator<Item = &EigenResult> {
        self.entries.iter().filter_map(|e| e.outcome.as_ref().ok())
    }
}

/// Runs [`minimize_pq_from`] for each `p` with `q = ceil(ell p)`, warm
/// starting from the previous minimizer.
pub fn sweep_pq(
    domain: &Arc<GridDomain>,
    ell: f64,
    p_list: &[f64],
    opts: &MinimizeOptions,
) -> Result<SweepTable> {
    if !(ell > 0.0 && ell < 1.0) {
        return Err(Error::InvalidParameter {
            name: "ell",
            value: ell,
            reason: "must lie in (0, 1)".into(),
        });
    }
    for (i, &p) in p_list.iter().enumerate() {
        if p.is_nan() || p < 4.0 || (i > 0 && p <= p_list[i - 1]) {
            return Err(Error::InvalidParameter {
                name: "p_list",
                value: p,
                reason: "entries must be >= 4 and strictly increasing".into(),
            });
        }
    }
    let mut entries = Vec::with_capacity(p_list.len());
    let mut warm: Option<ScalarField> = None;
    for &p in p_list {
        let params = PQParams::from_ratio(ell, p)?;
        let init = match &warm {
            Some(f) => f.clone(),
            None => distance_init(domain, params.q),
        };
        let outcome = minimize_pq_from(&init, params, opts);
        if let Ok(r) = &outcome {
            warm = Some(r.field.clone());
        }
        entries.push(SweepEntry { params, outcome });
    }
    Ok(SweepTable { ell, entries })
}
