//! Named checks with reproducible verdicts.
//!
//! Every check computes a list of labelled metrics and a list of thresholds
//! over those metrics; the verdict is a pure function of the two (see
//! [`CheckOutcome::evaluate`]). Evidence tables and fields ride along in
//! memory and are written by [`CheckOutcome::write`].

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::distance::{default_ridge_tolerance, distance_transform, inradius, ridge_analysis};
use crate::error::{Error, Result};
use crate::grid::{make_domain, GridDomain, ScalarField, Shape, ShapeSpec};
use crate::infinity::{
    continuation, distance_init, solve_concave, solve_eigen_l1, ConcaveProblem, SolveOptions,
    DEFAULT_WIDTH,
};
use crate::io;
use crate::plap::{self, MinimizeOptions, PQParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    /// Preconditions of the check do not hold for this input.
    Inapplicable,
    /// Metrics only, no thresholds by design.
    Reported,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Cmp {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">=")]
    Ge,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Threshold {
    pub metric: String,
    pub cmp: Cmp,
    pub bound: f64,
}

impl Threshold {
    /// NaN or a missing metric never satisfies a threshold.
    pub fn holds(&self, value: Option<f64>) -> bool {
        match (value, self.cmp) {
            (Some(v), Cmp::Le) => v <= self.bound,
            (Some(v), Cmp::Ge) => v >= self.bound,
            (None, _) => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metric {
    pub label: String,
    pub value: f64,
}

/// An evidence table written as CSV next to the report.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckOutcome {
    pub check_name: String,
    pub verdict: Verdict,
    pub metrics: Vec<Metric>,
    pub thresholds: Vec<Threshold>,
    pub notes: Vec<String>,
    pub artifacts: Vec<PathBuf>,
    #[serde(skip)]
    pub tables: Vec<Table>,
    #[serde(skip)]
    pub fields: Vec<(String, ScalarField)>,
}

impl CheckOutcome {
    pub fn new(name: impl Into<String>) -> Self {
        CheckOutcome {
            check_name: name.into(),
            verdict: Verdict::Fail,
            metrics: Vec::new(),
            thresholds: Vec::new(),
            notes: Vec::new(),
            artifacts: Vec::new(),
            tables: Vec::new(),
            fields: Vec::new(),
        }
    }

    pub fn metric(&self, label: &str) -> Option<f64> {
        self.metrics
            .iter()
            .find(|m| m.label == label)
            .map(|m| m.value)
            .filter(|v| !v.is_nan())
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }

    /// True unless the check was inapplicable or metrics-only.
    pub fn applicable(&self) -> bool {
        matches!(self.verdict, Verdict::Pass | Verdict::Fail)
    }

    pub fn push(&mut self, label: impl Into<String>, value: f64) {
        self.metrics.push(Metric {
            label: label.into(),
            value,
        });
    }

    pub fn require(&mut self, metric: impl Into<String>, cmp: Cmp, bound: f64) {
        self.thresholds.push(Threshold {
            metric: metric.into(),
            cmp,
            bound,
        });
    }

    /// Records `value` and requires `value <= bound`.
    pub fn at_most(&mut self, label: &str, value: f64, bound: f64) {
        self.push(label, value);
        self.require(label, Cmp::Le, bound);
    }

    /// Records `value` and requires `value >= bound`.
    pub fn at_least(&mut self, label: &str, value: f64, bound: f64) {
        self.push(label, value);
        self.require(label, Cmp::Ge, bound);
    }

    /// Notes a failure as a metric that cannot meet its threshold.
    pub fn fail_with(&mut self, label: &str, note: String) {
        self.notes.push(note);
        self.at_most(label, 1.0, 0.0);
    }

    /// Verdict implied by the recorded metrics and thresholds.
    pub fn evaluate(&self) -> Verdict {
        match self.verdict {
            Verdict::Inapplicable | Verdict::Reported => self.verdict,
            _ => {
                if self
                    .thresholds
                    .iter()
                    .all(|t| t.holds(self.metric(&t.metric)))
                {
                    Verdict::Pass
                } else {
                    Verdict::Fail
                }
            }
        }
    }

    fn decide(mut self) -> Self {
        self.verdict = self.evaluate();
        self
    }

    fn inapplicable(mut self, note: String) -> Self {
        self.notes.push(note);
        self.verdict = Verdict::Inapplicable;
        self
    }

    /// Thresholds that do not hold.
    pub fn violations(&self) -> Vec<&Threshold> {
        self.thresholds
            .iter()
            .filter(|t| !t.holds(self.metric(&t.metric)))
            .collect()
    }

    /// Writes tables (`<name>.csv`), fields (`<name>.csv` and `.pgm`) and
    /// `report.json` into `dir`, recording every file in `artifacts`.
    pub fn write(&mut self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        self.artifacts.clear();
        for t in &self.tables {
            let path = dir.join(format!("{}.csv", t.name));
            io::write_table_csv(&path, &t.header, &t.rows)?;
            self.artifacts.push(path);
        }
        for (name, f) in &self.fields {
            let csv = dir.join(format!("{name}.csv"));
            io::write_field_csv(f, &csv)?;
            let pgm = dir.join(format!("{name}.pgm"));
            io::write_pgm(f, &[], &pgm)?;
            self.artifacts.push(csv);
            self.artifacts.push(pgm);
        }
        let report = dir.join("report.json");
        self.artifacts.push(report.clone());
        io::write_json(self, &report)?;
        Ok(())
    }

    /// One summary line.
    pub fn summary(&self) -> String {
        let tag = match self.verdict {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::Inapplicable => "N/A ",
            Verdict::Reported => "INFO",
        };
        let mut shown: Vec<String> = self
            .thresholds
            .iter()
            .map(|t| {
                let v = self.metric(&t.metric).unwrap_or(f64::NAN);
                let op = if t.cmp == Cmp::Le { "<=" } else { ">=" };
                format!("{}={:.4e} {op} {:.4e}", t.metric, v, t.bound)
            })
            .collect();
        if shown.is_empty() {
            // nothing was judged; show what was measured
            shown = self
                .metrics
                .iter()
                .map(|m| format!("{}={:.4e}", m.label, m.value))
                .collect();
        }
        shown.extend(self.notes.iter().cloned());
        format!("[{tag}] {}: {}", self.check_name, shown.join(", "))
    }
}

/// Pass thresholds. The defaults are desk-scale choices, not derived bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Thresholds {
    /// Final `|Λ^(1/p) - λ∞|` as a fraction of `λ∞`.
    pub theorem1_fraction: f64,
    /// `sup |u/sup u - v_ℓ|`.
    pub theorem2_sup: f64,
    /// Closed-form and maximality slacks, in multiples of `h`.
    pub closed_form_h: f64,
    pub pairwise_h: f64,
    pub monotone_h: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            theorem1_fraction: 0.2,
            theorem2_sup: 0.15,
            closed_form_h: 10.0,
            pairwise_h: 2.0,
            monotone_h: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct VerifyOptions {
    pub thresholds: Thresholds,
    pub solve: SolveOptions,
    pub minimize: MinimizeOptions,
    /// Stencil width of the infinity solver.
    #[serde(skip)]
    pub width: Option<usize>,
}

impl VerifyOptions {
    fn width(&self) -> usize {
        self.width.unwrap_or(DEFAULT_WIDTH)
    }
}

fn fmt(v: f64) -> String {
    v.to_string()
}

fn grid_lambda(domain: &Arc<GridDomain>) -> Result<f64> {
    Ok(1.0 / inradius(&distance_transform(domain))?)
}

fn simple_ridge(domain: &Arc<GridDomain>) -> Result<bool> {
    let dist = distance_transform(domain);
    Ok(ridge_analysis(&dist, default_ridge_tolerance(domain))?.ridge_equals_max)
}

/// Sweep in `p` with `q = ⌈ℓp⌉`: passes iff `|Λ^(1/p) - λ∞|` never
/// increases along `p_list` and ends below `theorem1_fraction · λ∞`.
pub fn check_theorem1(
    domain: &Arc<GridDomain>,
    ell: f64,
    p_list: &[f64],
    opts: &VerifyOptions,
) -> CheckOutcome {
    check_theorem1_with(domain, ell, p_list, opts.thresholds.theorem1_fraction, opts)
}

/// [`check_theorem1`] with an explicit final-gap fraction.
pub fn check_theorem1_with(
    domain: &Arc<GridDomain>,
    ell: f64,
    p_list: &[f64],
    fraction: f64,
    opts: &VerifyOptions,
) -> CheckOutcome {
    let mut out = CheckOutcome::new(format!("theorem1_{}", domain.name()));
    let lam = match grid_lambda(domain) {
        Ok(l) => l,
        Err(e) => {
            out.fail_with("setup_error", e.to_string());
            return out.decide();
        }
    };
    out.push("lambda_infinity", lam);
    out.push("ell", ell);
    let table = match plap::sweep_pq(domain, ell, p_list, &opts.minimize) {
        Ok(t) => t,
        Err(e) => {
            out.fail_with("setup_error", e.to_string());
            return out.decide();
        }
    };
    let mut gaps = Vec::new();
    let mut failed = 0.0;
    let mut ratios = Vec::new();
    let mut rows = Vec::new();
    for e in &table.entries {
        match &e.outcome {
            Ok(r) => {
                let gap = (r.lambda_root - lam).abs();
                out.push(format!("lambda_root_p{}", r.params.p), r.lambda_root);
                out.push(format!("gap_p{}", r.params.p), gap);
                out.push(
                    format!("converged_p{}", r.params.p),
                    if r.converged { 1.0 } else { 0.0 },
                );
                gaps.push(gap);
                // ||field||_q = 1, so this is sup u / (Λ^(1/p) ||u||_q)
                ratios.push(r.field.sup() / r.lambda_root);
                rows.push(vec![
                    fmt(r.params.p),
                    fmt(r.params.q),
                    fmt(r.lambda_root),
                    r.iterations.to_string(),
                    fmt(r.grad_norm),
                    r.converged.to_string(),
                    fmt(gap),
                ]);
            }
            Err(err) => {
                failed += 1.0;
                out.notes.push(format!("p = {}: {err}", e.params.p));
            }
        }
    }
    out.at_most("failed_entries", failed, 0.0);
    let increase = gaps
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::NEG_INFINITY, f64::max);
    if gaps.len() >= 2 {
        out.at_most("max_gap_increase", increase, 0.0);
    }
    let final_frac = gaps.last().map_or(f64::NAN, |g| g / lam);
    out.at_most("final_gap_fraction", final_frac, fraction);
    if let Some(&r0) = ratios.first() {
        let growth = ratios.iter().fold(0.0f64, |m, &r| m.max(r / r0));
        out.push("sup_ratio_growth", growth);
    }
    out.tables.push(Table {
        name: "sweep".into(),
        header: io::SWEEP_HEADER
            .split(',')
            .map(String::from)
            .chain(["gap".to_string()])
            .collect(),
        rows,
    });
    if let Some(r) = table.results().last() {
        out.fields.push(("u_last".into(), r.field.clone()));
    }
    out.decide()
}

/// Compares the `(p_large, ⌈ℓ p_large⌉)` minimizer, scaled to sup 1, with
/// the solution `v_ℓ` of the sublinear problem.
pub fn check_theorem2(
    domain: &Arc<GridDomain>,
    ell: f64,
    p_large: f64,
    opts: &VerifyOptions,
) -> Result<CheckOutcome> {
    if !(ell > 0.0 && ell < 1.0) {
        return Err(Error::InvalidParameter {
            name: "ell",
            value: ell,
            reason: "the limit ratio must lie in (0, 1)".into(),
        });
    }
    if p_large.is_nan() || p_large < 40.0 {
        return Err(Error::InvalidParameter {
            name: "p_large",
            value: p_large,
            reason: "must be >= 40".into(),
        });
    }
    let mut out = CheckOutcome::new(format!("theorem2_{}", domain.name()));
    let params = PQParams::from_ratio(ell, p_large)?;
    let r = plap::minimize_pq_from(
        &plap::distance_init(domain, params.q),
        params,
        &opts.minimize,
    )?;
    let u = r.field.scaled(1.0 / r.field.sup());
    let problem = ConcaveProblem::new(domain.clone(), ell)?.width(opts.width())?;
    let (v, rep) = solve_concave(&problem, &distance_init(domain), &opts.solve)?;
    let closed = distance_init(domain);
    out.push("p", params.p);
    out.push("q", params.q);
    out.push("lambda_root", r.lambda_root);
    out.push("minimizer_converged", if r.converged { 1.0 } else { 0.0 });
    out.push("concave_converged", if rep.converged { 1.0 } else { 0.0 });
    let h = domain.h();
    if simple_ridge(domain)? {
        // both limits are known in closed form here
        let slack = opts.thresholds.closed_form_h * h + opts.thresholds.theorem2_sup;
        out.at_most("u_vs_closed_form", u.sup_diff(&closed), slack);
        out.at_most("v_vs_closed_form", v.sup_diff(&closed), slack);
    } else {
        out.push("u_vs_closed_form", u.sup_diff(&closed));
        out.push("v_vs_closed_form", v.sup_diff(&closed));
    }
    out.at_most("sup_diff", u.sup_diff(&v), opts.thresholds.theorem2_sup);
    out.fields.push(("u_normalized".into(), u));
    out.fields.push(("v_ell".into(), v));
    Ok(out.decide())
}

/// Builds `v̂` by the `ℓ` continuation and compares it with `ℓ = 1`
/// eigenfunctions started from each entry of `inits`.
pub fn check_theorem3(
    domain: &Arc<GridDomain>,
    schedule: &[f64],
    inits: &[(String, ScalarField)],
    opts: &VerifyOptions,
) -> Result<CheckOutcome> {
    let mut out = CheckOutcome::new(format!("theorem3_{}", domain.name()));
    let h = domain.h();
    let th = &opts.thresholds;
    let lam = grid_lambda(domain)?;
    let cont = continuation(domain, schedule, lam, opts.width(), &opts.solve)?;
    let min_gap = pairwise_monotone_gap(&cont.solutions);
    out.at_least("ell_monotone_gap", min_gap, -th.monotone_h * h);
    let vhat = &cont.field;
    let sup = vhat.sup();
    out.at_least("vhat_sup_low", sup, 1.0 - th.closed_form_h * h);
    out.at_most("vhat_sup_high", sup, 1.0);
    if let Some(st) = cont.stages.last() {
        out.push(
            "vhat_converged",
            if st.report.converged { 1.0 } else { 0.0 },
        );
        if let Some(c) = st.sup_change {
            out.push("last_stage_change", c);
        }
    }
    let simple = simple_ridge(domain)?;
    let mut rows = Vec::new();
    for (name, init) in inits {
        let (u, rep) = solve_eigen_l1(domain, lam, init, &opts.solve)?;
        let below = vhat.min_diff(&u);
        let above = vhat.max_diff(&u);
        out.at_least(&format!("maximality_{name}"), below, -th.monotone_h * h);
        out.push(format!("max_gap_{name}"), above);
        if simple {
            out.at_most(
                &format!("sup_diff_{name}"),
                vhat.sup_diff(&u),
                th.closed_form_h * h,
            );
        } else {
            out.push(format!("sup_diff_{name}"), vhat.sup_diff(&u));
        }
        rows.push(vec![
            name.clone(),
            fmt(below),
            fmt(above),
            rep.iterations.to_string(),
            rep.converged.to_string(),
        ]);
        out.fields.push((format!("candidate_{name}"), u));
    }
    out.tables.push(Table {
        name: "candidates".into(),
        header: [
            "init",
            "min_vhat_minus_u",
            "max_vhat_minus_u",
            "sweeps",
            "converged",
        ]
        .map(String::from)
        .to_vec(),
        rows,
    });
    out.tables.push(stage_table(&cont));
    out.fields.push(("vhat".into(), cont.field.clone()));
    Ok(out.decide())
}

/// `min_{i<j} min_x (v_i - v_j)(x)`.
pub fn pairwise_monotone_gap(solutions: &[ScalarField]) -> f64 {
    let mut g = f64::INFINITY;
    for i in 0..solutions.len() {
        for j in i + 1..solutions.len() {
            g = g.min(solutions[i].min_diff(&solutions[j]));
        }
    }
    g
}

fn stage_table(cont: &crate::infinity::MaximalOutcome) -> Table {
    let rows = cont
        .stages
        .iter()
        .map(|s| {
            vec![
                fmt(s.ell),
                s.report.iterations.to_string(),
                fmt(s.report.final_change),
                fmt(s.report.residual),
                s.report.converged.to_string(),
                fmt(s.report.sup_norm),
                s.monotone_gap.map_or(String::new(), fmt),
            ]
        })
        .collect();
    Table {
        name: "stages".into(),
        header: [
            "ell",
            "sweeps",
            "final_change",
            "residual",
            "converged",
            "sup_norm",
            "min_prev_minus_v",
        ]
        .map(String::from)
        .to_vec(),
        rows,
    }
}

/// Initial fields for [`check_theorem3`]: the distance field, plus its
/// restriction to each bulb on a dumbbell.
pub fn default_inits(domain: &Arc<GridDomain>) -> Vec<(String, ScalarField)> {
    let dist = distance_init(domain);
    let mut inits = vec![("distance".to_string(), dist.clone())];
    if let Some(Shape::Dumbbell { .. }) = domain.shape() {
        inits.push(("right_bulb".into(), dist.masked(|x, _| x > 0.0)));
        inits.push(("left_bulb".into(), dist.masked(|x, _| x < 0.0)));
    }
    inits
}

/// The unit disk eigenfunction against `1 - |x|`.
pub fn check_example_ball(h: f64, opts: &VerifyOptions) -> Result<CheckOutcome> {
    let domain = Arc::new(make_domain(&ShapeSpec::new(
        Shape::Disk { radius: 1.0 },
        h,
    ))?);
    let mut out = CheckOutcome::new("example_ball");
    let lam = grid_lambda(&domain)?;
    let problem = ConcaveProblem::with_lambda(domain.clone(), 1.0, lam)?.width(opts.width())?;
    let (v, rep) =
        crate::infinity::solve_eigen_l1_problem(&problem, &distance_init(&domain), &opts.solve)?;
    let cone = ScalarField::from_fn(domain.clone(), |x, y| 1.0 - x.hypot(y));
    out.push("sweeps", rep.iterations as f64);
    out.push("converged", if rep.converged { 1.0 } else { 0.0 });
    out.push("sup_norm", v.sup());
    out.at_most(
        "sup_err_cone",
        v.sup_diff(&cone),
        opts.thresholds.closed_form_h * h,
    );
    out.fields.push(("eigenfunction".into(), v));
    Ok(out.decide())
}

/// On domains whose ridge equals the max set, every `v_ℓ` should equal
/// `dist / R_h`.
pub fn check_remark_formula(
    domain: &Arc<GridDomain>,
    ell_list: &[f64],
    opts: &VerifyOptions,
) -> Result<CheckOutcome> {
    let out = CheckOutcome::new(format!("remark_{}", domain.name()));
    let dist = distance_transform(domain);
    let ridge = ridge_analysis(&dist, default_ridge_tolerance(domain))?;
    if !ridge.ridge_equals_max {
        return Ok(out.inapplicable(format!(
            "ridge set differs from max set ({} ridge cells, {} max cells)",
            ridge.ridge_cells.len(),
            ridge.max_cells.len()
        )));
    }
    let mut out = out;
    let h = domain.h();
    let th = &opts.thresholds;
    let lam = 1.0 / ridge.inradius;
    let cont = continuation(domain, ell_list, lam, opts.width(), &opts.solve)?;
    let closed = distance_init(domain);
    let mut rows = Vec::new();
    for (ell, v) in ell_list.iter().zip(&cont.solutions) {
        let err = v.sup_diff(&closed);
        out.at_most(
            &format!("closed_form_err_l{ell}"),
            err,
            th.closed_form_h * h,
        );
        rows.push(vec![fmt(*ell), fmt(err)]);
    }
    let mut pair = 0.0f64;
    for i in 0..cont.solutions.len() {
        for j in i + 1..cont.solutions.len() {
            pair = pair.max(cont.solutions[i].sup_diff(&cont.solutions[j]));
        }
    }
    out.at_most("pairwise_max", pair, th.pairwise_h * h);
    out.tables.push(Table {
        name: "closed_form".into(),
        header: vec!["ell".into(), "sup_err".into()],
        rows,
    });
    out.tables.push(stage_table(&cont));
    Ok(out.decide())
}

/// Exploratory: `λ_{1,p}` minimizers (`q = p`) scaled to sup 1 against
/// `v̂`. Reports metrics only.
pub fn conjecture_experiment(
    domain: &Arc<GridDomain>,
    p_list: &[f64],
    opts: &VerifyOptions,
) -> Result<CheckOutcome> {
    let mut out = CheckOutcome::new(format!("conjecture_{}", domain.name()));
    let lam = grid_lambda(domain)?;
    let cont = continuation(
        domain,
        &crate::infinity::DEFAULT_SCHEDULE,
        lam,
        opts.width(),
        &opts.solve,
    )?;
    let vhat = &cont.field;
    let mut warm: Option<ScalarField> = None;
    let mut rows = Vec::new();
    for &p in p_list {
        let params = PQParams::new(p, p)?;
        let init = warm
            .take()
            .unwrap_or_else(|| plap::distance_init(domain, params.q));
        let r = plap::minimize_pq_from(&init, params, &opts.minimize)?;
        let u = r.field.scaled(1.0 / r.field.sup());
        let d = u.sup_diff(vhat);
        out.push(format!("sup_diff_p{p}"), d);
        out.push(format!("lambda_root_p{p}"), r.lambda_root);
        rows.push(vec![
            fmt(p),
            fmt(r.lambda_root),
            fmt(d),
            r.converged.to_string(),
        ]);
        warm = Some(r.field);
    }
    out.tables.push(Table {
        name: "conjecture".into(),
        header: ["p", "lambda_root", "sup_diff_vhat", "converged"]
            .map(String::from)
            .to_vec(),
        rows,
    });
    out.fields.push(("vhat".into(), vhat.clone()));
    out.verdict = Verdict::Reported;
    Ok(out)
}

/// The shipped domain catalog at resolution `h`.
pub fn catalog(h: f64) -> Vec<ShapeSpec> {
    [
        Shape::Interval { length: 2.0 },
        Shape::Square { side: 1.0 },
        Shape::Disk { radius: 1.0 },
        Shape::Stadium {
            radius: 1.0,
            core_length: 1.0,
        },
        Shape::Annulus {
            r_in: 1.0,
            r_out: 2.0,
        },
        Shape::Dumbbell {
            bulb_radius: 1.0,
            bridge_halfwidth: 0.1,
            bridge_length: 1.0,
        },
    ]
    .into_iter()
    .map(|s| ShapeSpec::new(s, h))
    .collect()
}

/// A named unit of work for [`run_suite`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "check", rename_all = "snake_case")]
pub enum CheckSpec {
    Theorem1 {
        domain: ShapeSpec,
        ell: f64,
        p_list: Vec<f64>,
        /// Overrides the configured final-gap fraction.
        #[serde(default)]
        gap_fraction: Option<f64>,
    },
    Theorem2 {
        domain: ShapeSpec,
        ell: f64,
        p_large: f64,
    },
    Theorem3 {
        domain: ShapeSpec,
        schedule: Vec<f64>,
    },
    ExampleBall {
        h: f64,
    },
    Remark {
        domain: ShapeSpec,
        ell_list: Vec<f64>,
    },
    Conjecture {
        domain: ShapeSpec,
        p_list: Vec<f64>,
    },
}

impl CheckSpec {
    pub fn name(&self) -> String {
        let dom = |d: &ShapeSpec| d.shape.name().to_string();
        match self {
            CheckSpec::Theorem1 { domain, .. } => format!("theorem1_{}", dom(domain)),
            CheckSpec::Theorem2 { domain, .. } => format!("theorem2_{}", dom(domain)),
            CheckSpec::Theorem3 { domain, .. } => format!("theorem3_{}", dom(domain)),
            CheckSpec::ExampleBall { .. } => "example_ball".into(),
            CheckSpec::Remark { domain, .. } => format!("remark_{}", dom(domain)),
            CheckSpec::Conjecture { domain, .. } => format!("conjecture_{}", dom(domain)),
        }
    }

    /// Runs the check; errors become failed outcomes carrying the message.
    pub fn run(&self, opts: &VerifyOptions) -> CheckOutcome {
        let result = (|| -> Result<CheckOutcome> {
            let dom = |s: &ShapeSpec| make_domain(s).map(Arc::new);
            Ok(match self {
                CheckSpec::Theorem1 {
                    domain,
                    ell,
                    p_list,
                    gap_fraction,
                } => check_theorem1_with(
                    &dom(domain)?,
                    *ell,
                    p_list,
                    gap_fraction.unwrap_or(opts.thresholds.theorem1_fraction),
                    opts,
                ),
                CheckSpec::Theorem2 {
                    domain,
                    ell,
                    p_large,
                } => check_theorem2(&dom(domain)?, *ell, *p_large, opts)?,
                CheckSpec::Theorem3 { domain, schedule } => {
                    let d = dom(domain)?;
                    check_theorem3(&d, schedule, &default_inits(&d), opts)?
                }
                CheckSpec::ExampleBall { h } => check_example_ball(*h, opts)?,
                CheckSpec::Remark { domain, ell_list } => {
                    check_remark_formula(&dom(domain)?, ell_list, opts)?
                }
                CheckSpec::Conjecture { domain, p_list } => {
                    conjecture_experiment(&dom(domain)?, p_list, opts)?
                }
            })
        })();
        result.unwrap_or_else(|e| {
            let mut out = CheckOutcome::new(self.name());
            out.fail_with("error", e.to_string());
            out.decide()
        })
    }
}

/// The full suite over the catalog at resolution `h`.
pub fn default_suite(h: f64) -> Vec<CheckSpec> {
    let cat = catalog(h);
    let by = |name: &str| {
        cat.iter()
            .find(|s| s.shape.name() == name)
            .cloned()
            .expect("catalog entry")
    };
    let plist = vec![10.0, 20.0, 40.0, 80.0];
    let schedule = crate::infinity::DEFAULT_SCHEDULE.to_vec();
    let mut suite = vec![
        CheckSpec::Theorem1 {
            domain: by("disk"),
            ell: 0.5,
            p_list: plist.clone(),
            gap_fraction: None,
        },
        CheckSpec::Theorem1 {
            domain: by("square"),
            ell: 0.5,
            p_list: plist.clone(),
            gap_fraction: None,
        },
        // 1D is cheap: finer grid, larger p, tighter bound
        CheckSpec::Theorem1 {
            domain: ShapeSpec::new(Shape::Interval { length: 2.0 }, h / 5.0),
            ell: 0.5,
            p_list: vec![10.0, 20.0, 40.0, 80.0, 160.0],
            gap_fraction: Some(0.1),
        },
        CheckSpec::Theorem2 {
            domain: by("disk"),
            ell: 0.5,
            p_large: 80.0,
        },
        CheckSpec::Theorem2 {
            domain: by("stadium"),
            ell: 0.5,
            p_large: 80.0,
        },
        CheckSpec::ExampleBall { h },
    ];
    for name in ["dumbbell", "disk", "stadium"] {
        suite.push(CheckSpec::Theorem3 {
            domain: by(name),
            schedule: schedule.clone(),
        });
    }
    for name in ["disk", "annulus", "stadium", "square"] {
        suite.push(CheckSpec::Remark {
            domain: by(name),
            ell_list: vec![0.3, 0.6, 0.9],
        });
    }
    suite.push(CheckSpec::Conjecture {
        domain: by("dumbbell"),
        p_list: vec![10.0, 20.0, 40.0],
    });
    suite
}

/// Runs `suite`, writing each outcome into `out_dir/<check_name>/` when a
/// directory is given.
pub fn run_suite(
    suite: &[CheckSpec],
    opts: &VerifyOptions,
    out_dir: Option<&Path>,
) -> Result<Vec<CheckOutcome>> {
    let mut outcomes = Vec::with_capacity(suite.len());
    for spec in suite {
        let mut o = spec.run(opts);
        if let Some(dir) = out_dir {
            o.write(&dir.join(&o.check_name))?;
        }
        outcomes.push(o);
    }
    Ok(outcomes)
}

/// Exit status convention: nonzero iff an applicable check failed.
pub fn suite_passed(outcomes: &[CheckOutcome]) -> bool {
    outcomes.iter().all(|o| !o.applicable() || o.passed())
}
