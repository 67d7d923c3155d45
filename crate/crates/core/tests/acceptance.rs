//! Acceptance criteria. Runs without the libtest harness so every criterion
//! prints one line; the process exits nonzero if any criterion fails.

use std::sync::Arc;
use std::time::Instant;

use infeig::distance::distance_transform;
use infeig::grid::{make_domain, GridDomain, ScalarField, Shape, ShapeSpec};
use infeig::infinity::{
    concave_update, continuation, solve_concave, solve_eigen_l1, ConcaveProblem, SolveOptions,
    DEFAULT_SCHEDULE, DEFAULT_WIDTH,
};
use infeig::plap::{log_rayleigh_gradient, log_rayleigh_pq, p_energy, PQParams};
use infeig::verify::{
    catalog, check_example_ball, check_remark_formula, check_theorem1_with, check_theorem2,
    default_inits, pairwise_monotone_gap, CheckOutcome, VerifyOptions,
};
use infeig::{inradius, lambda_infinity};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Verdict = Result<(bool, String), String>;

fn domain(shape: Shape, h: f64) -> Arc<GridDomain> {
    Arc::new(make_domain(&ShapeSpec::new(shape, h)).expect("catalog domain"))
}

fn catalog_domain(name: &str, h: f64) -> Arc<GridDomain> {
    let spec = catalog(h)
        .into_iter()
        .find(|s| s.shape.name() == name)
        .expect("catalog entry");
    Arc::new(make_domain(&spec).expect("catalog domain"))
}

fn metric(o: &CheckOutcome, label: &str) -> Result<f64, String> {
    o.metric(label).ok_or_else(|| {
        format!(
            "{}: metric `{label}` missing; notes {:?}",
            o.check_name, o.notes
        )
    })
}

fn geometric_eigenvalue() -> Verdict {
    let h = 0.01;
    let disk =
        lambda_infinity(&domain(Shape::Disk { radius: 1.0 }, h)).map_err(|e| e.to_string())?;
    let square =
        lambda_infinity(&domain(Shape::Square { side: 1.0 }, h)).map_err(|e| e.to_string())?;
    let annulus = lambda_infinity(&domain(
        Shape::Annulus {
            r_in: 1.0,
            r_out: 2.0,
        },
        h,
    ))
    .map_err(|e| e.to_string())?;
    let ok = (1.0..=1.0 / (1.0 - 2.0 * h)).contains(&disk)
        && (square - 2.0).abs() <= 3.0 * h
        && (annulus - 2.0).abs() <= 3.0 * h;
    Ok((
        ok,
        format!("disk {disk:.6}, square {square:.6}, annulus {annulus:.6}"),
    ))
}

fn brute_force_distance(d: &GridDomain) -> Vec<f64> {
    let outside: Vec<(i64, i64)> = (0..d.len())
        .filter(|&k| !d.is_interior(k))
        .map(|k| d.lattice(k))
        .collect();
    (0..d.len())
        .map(|k| {
            if !d.is_interior(k) {
                return 0.0;
            }
            let (i, j) = d.lattice(k);
            let n = outside
                .iter()
                .map(|&(a, b)| (a - i) * (a - i) + (b - j) * (b - j))
                .min()
                .unwrap();
            d.h() * (n as f64).sqrt()
        })
        .collect()
}

fn distance_oracle() -> Verdict {
    let mut worst = 0.0f64;
    let mut names = Vec::new();
    for spec in catalog(0.05) {
        let mut h = spec.h;
        let d = loop {
            let d =
                make_domain(&ShapeSpec::new(spec.shape.clone(), h)).map_err(|e| e.to_string())?;
            if d.len() <= 10_000 {
                break Arc::new(d);
            }
            h *= 1.25;
        };
        let fast = distance_transform(&d);
        let slow = brute_force_distance(&d);
        let err = fast
            .values()
            .iter()
            .zip(&slow)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        worst = worst.max(err);
        names.push(format!("{}({} cells)", d.name(), d.len()));
    }
    Ok((
        worst <= 1e-12 && names.len() == 6,
        format!("max error {worst:.1e} over {}", names.join(" ")),
    ))
}

fn closed_form_reproduction() -> Verdict {
    let h = 0.02;
    let ells = [0.3, 0.5, 0.7, 0.9];
    let opts = VerifyOptions::default();
    let mut ok = true;
    let mut parts = Vec::new();
    for name in ["disk", "stadium"] {
        let o = check_remark_formula(&catalog_domain(name, h), &ells, &opts)
            .map_err(|e| e.to_string())?;
        let err = ells
            .iter()
            .map(|l| metric(&o, &format!("closed_form_err_l{l}")))
            .collect::<Result<Vec<_>, _>>()?
            .into_iter()
            .fold(0.0, f64::max);
        let pair = metric(&o, "pairwise_max")?;
        ok &= o.passed() && err <= 10.0 * h && pair <= 2.0 * h;
        parts.push(format!("{name}: closed-form {err:.4}, pairwise {pair:.2e}"));
    }
    Ok((
        ok,
        format!("{} (limits {}, {})", parts.join("; "), 10.0 * h, 2.0 * h),
    ))
}

fn ball_eigenfunction() -> Verdict {
    let h = 0.02;
    let o = check_example_ball(h, &VerifyOptions::default()).map_err(|e| e.to_string())?;
    let err = metric(&o, "sup_err_cone")?;
    Ok((
        o.passed() && err <= 10.0 * h,
        format!("sup|v - (1 - |x|)| = {err:.4} (limit {})", 10.0 * h),
    ))
}

fn ell_monotonicity() -> Verdict {
    let h = 0.02;
    let opts = SolveOptions::default();
    let mut ok = true;
    let mut parts = Vec::new();
    for name in ["disk", "square", "stadium", "dumbbell"] {
        let d = catalog_domain(name, h);
        let lam = lambda_infinity(&d).map_err(|e| e.to_string())?;
        let cont = continuation(&d, &DEFAULT_SCHEDULE, lam, DEFAULT_WIDTH, &opts)
            .map_err(|e| e.to_string())?;
        let gap = pairwise_monotone_gap(&cont.solutions);
        ok &= gap >= -h;
        parts.push(format!("{name} {gap:.2e}"));
    }
    Ok((
        ok,
        format!("min(v_l1 - v_l2): {} (limit -{h})", parts.join(", ")),
    ))
}

fn dumbbell_maximality() -> Verdict {
    let h = 0.02;
    let opts = SolveOptions::default();
    let d = catalog_domain("dumbbell", h);
    let lam = lambda_infinity(&d).map_err(|e| e.to_string())?;
    let cont = continuation(&d, &DEFAULT_SCHEDULE, lam, DEFAULT_WIDTH, &opts)
        .map_err(|e| e.to_string())?;
    let vhat = &cont.field;
    let (_, init) = default_inits(&d)
        .into_iter()
        .find(|(n, _)| n == "right_bulb")
        .ok_or("no one-bulb init")?;
    let (u, _) = solve_eigen_l1(&d, lam, &init, &opts).map_err(|e| e.to_string())?;
    let below = vhat.min_diff(&u);
    let above = vhat.max_diff(&u);
    Ok((
        below >= -h && above > 0.1,
        format!(
            "min(vhat - u) = {below:.2e} (limit -{h}), max(vhat - u) = {above:.4} (limit > 0.1)"
        ),
    ))
}

fn theorem1_trend() -> Verdict {
    let opts = VerifyOptions::default();
    let mut ok = true;
    let mut parts = Vec::new();
    let runs: [(&str, f64, &[f64], f64); 2] = [
        ("disk", 0.02, &[10.0, 20.0, 40.0, 80.0], 0.2),
        ("interval", 0.004, &[10.0, 20.0, 40.0, 80.0, 160.0], 0.1),
    ];
    for (name, h, plist, limit) in runs {
        let o = check_theorem1_with(&catalog_domain(name, h), 0.5, plist, limit, &opts);
        // the continuum value is 1 on both domains
        let gaps = plist
            .iter()
            .map(|p| metric(&o, &format!("lambda_root_p{p}")).map(|r| (r - 1.0).abs()))
            .collect::<Result<Vec<_>, _>>()?;
        let monotone = gaps.windows(2).all(|w| w[1] <= w[0]);
        let last = *gaps.last().unwrap();
        ok &= monotone && last <= limit && metric(&o, "failed_entries")? == 0.0;
        let shown: Vec<String> = gaps.iter().map(|g| format!("{g:.4}")).collect();
        parts.push(format!(
            "{name} gaps [{}] (final limit {limit})",
            shown.join(", ")
        ));
    }
    Ok((ok, parts.join("; ")))
}

fn theorem2_proximity() -> Verdict {
    let o = check_theorem2(
        &catalog_domain("disk", 0.02),
        0.5,
        80.0,
        &VerifyOptions::default(),
    )
    .map_err(|e| e.to_string())?;
    let d = metric(&o, "sup_diff")?;
    Ok((
        d <= 0.15,
        format!("sup|u/sup u - v_l| = {d:.4} (limit 0.15)"),
    ))
}

fn numerics_hygiene() -> Verdict {
    let d = catalog_domain("disk", 0.2);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let vals: Vec<f64> = (0..d.len()).map(|_| 0.5 + rng.gen::<f64>()).collect();
    let u = ScalarField::from_values(d.clone(), vals).map_err(|e| e.to_string())?;
    let mut worst_grad = 0.0f64;
    for (p, q) in [(2.0, 2.0), (4.0, 3.0), (10.0, 5.0)] {
        let params = PQParams::new(p, q).map_err(|e| e.to_string())?;
        let (_, g) = log_rayleigh_gradient(&u, &params).map_err(|e| e.to_string())?;
        let cells = d.interior_cells();
        for _ in 0..20 {
            let k = cells[rng.gen_range(0..cells.len())];
            let f = |t: f64| {
                let mut v = u.clone();
                v.set(k, u.get(k) + t);
                log_rayleigh_pq(&v, &params).unwrap()
            };
            let s = 1e-3;
            // fourth-order central difference
            let fd = (8.0 * (f(s) - f(-s)) - (f(2.0 * s) - f(-2.0 * s))) / (12.0 * s);
            worst_grad = worst_grad.max((fd - g.get(k)).abs() / g.get(k).abs());
        }
    }
    let mut worst_scale = 0.0f64;
    for (p, q) in [(2.0, 2.0), (10.0, 5.0), (100.0, 50.0)] {
        let params = PQParams::new(p, q).map_err(|e| e.to_string())?;
        let base = log_rayleigh_pq(&u, &params).map_err(|e| e.to_string())?;
        for c in [1e-3, 1.0, 1e3] {
            let r = log_rayleigh_pq(&u.scaled(c), &params).map_err(|e| e.to_string())?;
            worst_scale = worst_scale.max((r - base).exp_m1().abs());
        }
    }
    // |grad u| ~ 1e6 puts the energy near 1e600 at p = 100
    let big = distance_transform(&d).into_field().scaled(1e6);
    let params = PQParams::new(100.0, 50.0).map_err(|e| e.to_string())?;
    let log_r = log_rayleigh_pq(&big, &params).map_err(|e| e.to_string())?;
    let log_e = p_energy(&big, 100.0);
    let finite = log_r.is_finite() && log_e.is_finite() && log_e > 709.0;
    Ok((
        worst_grad < 1e-6 && worst_scale <= 1e-10 && finite,
        format!(
            "gradient rel err {worst_grad:.1e} (limit 1e-6), scale drift {worst_scale:.1e} (limit 1e-10), p=100 ln E = {log_e:.1}, ln R = {log_r:.3}"
        ),
    ))
}

/// Solves `v_i = max((v_{i-1} + v_{i+1}) / 2, min(v_{i-1}, v_{i+1}) + h λ v_i^ℓ)`
/// on `n` positive unknowns with zero ends by damped semismooth Newton on
/// the relative residual `G_i = F_i / v_i`, which blows up near the trivial
/// solution `v = 0`.
fn newton_1d(n: usize, h: f64, lambda: f64, ell: f64, init: &[f64]) -> Vec<f64> {
    let nb = |v: &[f64], i: usize| {
        let l = if i > 0 { v[i - 1] } else { 0.0 };
        let r = if i + 1 < n { v[i + 1] } else { 0.0 };
        (l, r)
    };
    let resid = |v: &[f64]| -> Vec<f64> {
        (0..n)
            .map(|i| {
                let (l, r) = nb(v, i);
                1.0 - (0.5 * l + 0.5 * r).max(l.min(r) + h * lambda * v[i].powf(ell)) / v[i]
            })
            .collect()
    };
    let sq = |r: &[f64]| r.iter().map(|x| x * x).sum::<f64>();
    let mut v = init.to_vec();
    for _ in 0..500 {
        let g = resid(&v);
        if g.iter().all(|x| x.abs() < 1e-15) {
            break;
        }
        // G_i = 1 - M_i / v_i, so dG_i = -dM_i / v_i + M_i / v_i^2 e_i
        let mut jac = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            let (l, r) = nb(&v, i);
            let a = 0.5 * l + 0.5 * r;
            let b = l.min(r) + h * lambda * v[i].powf(ell);
            let vi = v[i];
            jac[(i, i)] = a.max(b) / (vi * vi);
            if a >= b {
                if i > 0 {
                    jac[(i, i - 1)] -= 0.5 / vi;
                }
                if i + 1 < n {
                    jac[(i, i + 1)] -= 0.5 / vi;
                }
            } else {
                jac[(i, i)] -= h * lambda * ell * vi.powf(ell - 1.0) / vi;
                let j = if l <= r {
                    i.checked_sub(1)
                } else {
                    Some(i + 1).filter(|&j| j < n)
                };
                if let Some(j) = j {
                    jac[(i, j)] -= 1.0 / vi;
                }
            }
        }
        let step = jac
            .lu()
            .solve(&DVector::from_column_slice(&g))
            .expect("nonsingular Jacobian");
        let g0 = sq(&g);
        // no entry may fall below half its value in one step
        let mut t = (0..n)
            .filter(|&i| step[i] > 0.0)
            .map(|i| 0.5 * v[i] / step[i])
            .fold(1.0f64, f64::min);
        loop {
            let trial: Vec<f64> = (0..n).map(|i| v[i] - t * step[i]).collect();
            if sq(&resid(&trial)) <= (1.0 - 1e-4 * t) * g0 || t < 1e-12 {
                v = trial;
                break;
            }
            t *= 0.5;
        }
    }
    v
}

fn scheme_properties() -> Verdict {
    // 9 x 9 grid with a 5 x 5 interior
    let d = domain(Shape::Square { side: 1.0 }, 0.2);
    if (d.nx(), d.ny()) != (9, 9) {
        return Err(format!("expected a 9x9 grid, got {}x{}", d.nx(), d.ny()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut violations = 0usize;
    for _ in 0..1000 {
        let ell = rng.gen_range(0.05..0.95);
        let lambda = rng.gen_range(0.5..5.0);
        let width = if rng.gen_bool(0.5) { 1 } else { 2 };
        let problem = ConcaveProblem::with_lambda(d.clone(), ell, lambda)
            .and_then(|p| p.width(width))
            .map_err(|e| e.to_string())?;
        let lo_vals: Vec<f64> = (0..d.len()).map(|_| rng.gen::<f64>()).collect();
        let lo = ScalarField::from_values(d.clone(), lo_vals).map_err(|e| e.to_string())?;
        let bumps: Vec<f64> = (0..d.len())
            .map(|_| {
                if rng.gen_bool(0.5) {
                    0.0
                } else {
                    rng.gen::<f64>()
                }
            })
            .collect();
        let hi_vals: Vec<f64> = lo.values().iter().zip(&bumps).map(|(a, b)| a + b).collect();
        let hi = ScalarField::from_values(d.clone(), hi_vals).map_err(|e| e.to_string())?;
        let tlo = concave_update(&lo, &problem).map_err(|e| e.to_string())?;
        let thi = concave_update(&hi, &problem).map_err(|e| e.to_string())?;
        violations += tlo
            .values()
            .iter()
            .zip(thi.values())
            .filter(|(a, b)| a > b)
            .count();
    }

    // 51 interior cells on (-1, 1)
    let d1 = domain(Shape::Interval { length: 2.0 }, 0.039);
    let cells = d1.interior_cells().to_vec();
    if cells.len() != 51 {
        return Err(format!("expected 51 interior cells, got {}", cells.len()));
    }
    let radius = inradius(&distance_transform(&d1)).map_err(|e| e.to_string())?;
    let opts = SolveOptions::new(1e-15, 2_000_000);
    let mut worst = 0.0f64;
    for (ell, lambda) in [(0.5, 1.0 / radius), (0.3, 2.5), (0.8, 1.7)] {
        let problem =
            ConcaveProblem::with_lambda(d1.clone(), ell, lambda).map_err(|e| e.to_string())?;
        let init = distance_transform(&d1).into_field();
        let (v, _) = solve_concave(&problem, &init, &opts).map_err(|e| e.to_string())?;
        // c v solves the problem with λ c^(ℓ-1), which fixes the scale;
        // from below, Newton can slide into the trivial solution
        let scale = (lambda * radius).powf(1.0 / (1.0 - ell));
        let start: Vec<f64> = cells
            .iter()
            .map(|&k| {
                let (x, _) = d1.center(k);
                1.2 * scale * (1.0 - x * x)
            })
            .collect();
        let w = newton_1d(cells.len(), d1.h(), lambda, ell, &start);
        for (c, &k) in cells.iter().enumerate() {
            worst = worst.max((v.get(k) - w[c]).abs());
        }
    }
    Ok((
        violations == 0 && worst <= 1e-8,
        format!(
            "order violations {violations} over 1000 pairs, 1D oracle gap {worst:.1e} (limit 1e-8)"
        ),
    ))
}

type Criterion = (&'static str, f64, fn() -> Verdict);

fn main() {
    let criteria: [Criterion; 10] = [
        ("geometric eigenvalue", 5.0, geometric_eigenvalue),
        ("distance-transform oracle", 10.0, distance_oracle),
        ("closed-form reproduction", 60.0, closed_form_reproduction),
        ("ball eigenfunction", 30.0, ball_eigenfunction),
        ("ell-monotonicity", 120.0, ell_monotonicity),
        ("dumbbell maximality", 120.0, dumbbell_maximality),
        ("p-limit trend", 600.0, theorem1_trend),
        ("large-p proximity", 600.0, theorem2_proximity),
        ("numerics hygiene", 30.0, numerics_hygiene),
        ("scheme comparison", 30.0, scheme_properties),
    ];
    let filter: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let mut failed = 0;
    for (i, (name, budget, run)) in criteria.iter().enumerate() {
        let id = format!("{}", i + 1);
        if !filter.is_empty() && !filter.iter().any(|f| *f == id || name.contains(f.as_str())) {
            continue;
        }
        let t0 = Instant::now();
        let verdict = run();
        let secs = t0.elapsed().as_secs_f64();
        let (ok, detail) = match verdict {
            Ok((ok, detail)) => (ok && secs < *budget, detail),
            Err(e) => (false, format!("error: {e}")),
        };
        if !ok {
            failed += 1;
        }
        println!(
            "criterion {id:>2} {}: {name}: {detail} [{secs:.1}s, budget {budget}s]",
            if ok { "PASS" } else { "FAIL" }
        );
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
