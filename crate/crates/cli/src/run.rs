//! Pipelines behind the subcommands. Every pipeline writes into one output
//! directory and finishes with `manifest.json`; a failed run also leaves a
//! `FAILED` marker next to whatever it had already written.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use infeig::distance::{distance_transform, ridge_analysis};
use infeig::infinity::{
    continuation, distance_init, solve_concave, solve_eigen_l1_problem, ConcaveProblem,
    SolveOptions,
};
use infeig::io;
use infeig::plap::{sweep_pq, MinimizeOptions};
use infeig::verify::{default_suite, suite_passed, CheckOutcome, VerifyOptions};
use infeig::ScalarField;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::config::{Resolved, Task};

/// Collects emitted files, relative to the output directory.
pub struct Emitter {
    dir: PathBuf,
    files: Vec<PathBuf>,
}

impl Emitter {
    pub fn new(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let marker = dir.join("FAILED");
        if marker.exists() {
            std::fs::remove_file(&marker)?;
        }
        Ok(Emitter {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    fn path(&mut self, name: &str) -> PathBuf {
        let p = self.dir.join(name);
        self.files.push(PathBuf::from(name));
        p
    }

    fn field(&mut self, name: &str, f: &ScalarField, overlay: &[usize]) -> Result<()> {
        io::write_field_csv(f, &self.path(&format!("{name}.csv")))?;
        io::write_pgm(f, overlay, &self.path(&format!("{name}.pgm")))?;
        Ok(())
    }

    fn json<T: Serialize + ?Sized>(&mut self, name: &str, v: &T) -> Result<()> {
        io::write_json(v, &self.path(name))?;
        Ok(())
    }

    fn adopt(&mut self, paths: &[PathBuf]) {
        for p in paths {
            let rel = p.strip_prefix(&self.dir).unwrap_or(p).to_path_buf();
            self.files.push(rel);
        }
    }

    pub fn finish(mut self, cfg: &Resolved, outcome: &Result<bool>) -> Result<()> {
        let status = match outcome {
            Ok(true) => "ok",
            Ok(false) => "checks-failed",
            Err(_) => "failed",
        };
        if let Err(e) = outcome {
            let marker = self.dir.join("FAILED");
            std::fs::write(&marker, format!("{e:#}\n"))?;
            self.files.push("FAILED".into());
        }
        let manifest = json!({
            "config_hash": cfg.hash(),
            "solver": cfg.task.name(),
            "config": cfg,
            "status": status,
            "error": outcome.as_ref().err().map(|e| format!("{e:#}")),
            "artifacts": self.files,
        });
        io::write_json(&manifest, &self.dir.join("manifest.json"))?;
        Ok(())
    }
}

/// Runs the pipeline. `Ok(false)` means it ran but some check failed.
pub fn execute(cfg: &Resolved, em: &mut Emitter) -> Result<bool> {
    let domain = cfg.build_domain()?;
    match &cfg.task {
        Task::PqSweep {
            ell,
            p_list,
            tol,
            max_iter,
        } => {
            let d = domain.expect("sweep has a domain");
            let opts = MinimizeOptions {
                tol: *tol,
                max_iter: *max_iter,
                ..MinimizeOptions::default()
            };
            let table = sweep_pq(&d, *ell, p_list, &opts)?;
            io::write_sweep_csv(&table.rows(), &em.path("sweep.csv"))?;
            for r in table.results() {
                em.field(&format!("u_p{}", r.params.p), &r.field, &[])?;
            }
            let failures: Vec<String> = table
                .entries
                .iter()
                .filter_map(|e| {
                    e.outcome
                        .as_ref()
                        .err()
                        .map(|x| format!("p = {}: {x}", e.params.p))
                })
                .collect();
            let results: Vec<_> = table.results().collect();
            em.json(
                "report.json",
                &json!({ "ell": ell, "results": results, "failures": failures }),
            )?;
            if !failures.is_empty() {
                anyhow::bail!("sweep entries failed: {}", failures.join("; "));
            }
            Ok(true)
        }
        Task::Concave {
            ell,
            lambda,
            tol,
            max_sweeps,
            width,
        } => {
            let d = domain.expect("concave has a domain");
            let problem = ConcaveProblem::with_lambda(d.clone(), *ell, *lambda)?.width(*width)?;
            let opts = SolveOptions::new(*tol, *max_sweeps);
            let (v, rep) = solve_concave(&problem, &distance_init(&d), &opts)?;
            em.field("v", &v, &[])?;
            em.json(
                "report.json",
                &json!({ "ell": ell, "lambda": lambda, "report": rep }),
            )?;
            Ok(true)
        }
        Task::Maximal {
            schedule,
            lambda,
            tol,
            max_sweeps,
            width,
        } => {
            let d = domain.expect("maximal has a domain");
            let opts = SolveOptions::new(*tol, *max_sweeps);
            // stages are written before the monotonicity check so a
            // rejected chain still leaves its evidence
            let out = continuation(&d, schedule, *lambda, *width, &opts)?;
            for (l, v) in schedule.iter().zip(&out.solutions) {
                em.field(&format!("v_l{l}"), v, &[])?;
            }
            em.field("vhat", &out.field, &[])?;
            em.json("stages.json", &out.stages)?;
            for st in &out.stages {
                if let Some(g) = st.monotone_gap {
                    if g < -d.h() {
                        anyhow::bail!(
                            "monotonicity in the exponent violated at l = {}: min(v_prev - v) = {g:.3e}",
                            st.ell
                        );
                    }
                }
            }
            Ok(true)
        }
        Task::EigenL1 {
            lambda,
            tol,
            max_sweeps,
            width,
            init,
        } => {
            let d = domain.expect("eigen-l1 has a domain");
            let problem = ConcaveProblem::with_lambda(d.clone(), 1.0, *lambda)?.width(*width)?;
            let start = infeig::verify::default_inits(&d)
                .into_iter()
                .find(|(n, _)| n == init)
                .map(|(_, f)| f)
                .with_context(|| format!("no initial field `{init}` for this domain"))?;
            let (u, rep) =
                solve_eigen_l1_problem(&problem, &start, &SolveOptions::new(*tol, *max_sweeps))?;
            em.field("u", &u, &[])?;
            em.json(
                "report.json",
                &json!({ "lambda": lambda, "init": init, "report": rep }),
            )?;
            Ok(true)
        }
        Task::Export { ridge_tolerance } => {
            let d = domain.expect("export has a domain");
            let dist = distance_transform(&d);
            let ridge = ridge_analysis(&dist, *ridge_tolerance)?;
            em.field("distance", dist.as_field(), &ridge.ridge_cells)?;
            io::write_pgm(dist.as_field(), &ridge.max_cells, &em.path("max_set.pgm"))?;
            em.json("ridge.json", &ridge)?;
            Ok(true)
        }
        Task::Verify {
            h,
            checks,
            thresholds,
        } => {
            let suite: Vec<_> = default_suite(*h)
                .into_iter()
                .filter(|c| {
                    checks
                        .iter()
                        .any(|f| f == "all" || c.name().starts_with(f.as_str()))
                })
                .collect();
            let opts = VerifyOptions {
                thresholds: *thresholds,
                ..VerifyOptions::default()
            };
            // checks are independent; the pool decides how many run at once
            let mut outcomes: Vec<CheckOutcome> = suite.par_iter().map(|c| c.run(&opts)).collect();
            let dir = em.dir.clone();
            for o in &mut outcomes {
                o.write(&dir.join(&o.check_name))?;
                em.adopt(&o.artifacts);
                println!("{}", o.summary());
            }
            let summary: Vec<_> = outcomes
                .iter()
                .map(|o| json!({ "check": o.check_name, "verdict": o.verdict }))
                .collect();
            em.json("summary.json", &summary)?;
            Ok(suite_passed(&outcomes))
        }
    }
}
