//! Run configuration: TOML file plus flag overrides, validated up front and
//! resolved into a canonical form whose hash identifies the run.

use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use infeig::distance::{default_ridge_tolerance, distance_transform, inradius};
use infeig::grid::{make_domain, GridDomain, Shape, ShapeSpec};
use infeig::infinity::{DEFAULT_SCHEDULE, DEFAULT_WIDTH};
use infeig::verify::Thresholds;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverKind {
    PqSweep,
    Concave,
    Maximal,
    EigenL1,
    Export,
    Verify,
}

impl SolverKind {
    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "pq-sweep" => SolverKind::PqSweep,
            "concave" => SolverKind::Concave,
            "maximal" => SolverKind::Maximal,
            "eigen-l1" => SolverKind::EigenL1,
            "export" => SolverKind::Export,
            "verify" => SolverKind::Verify,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    pub kind: Option<SolverKind>,
    pub ell: Option<f64>,
    pub schedule: Option<Vec<f64>>,
    pub p_list: Option<Vec<f64>>,
    pub lambda: Option<f64>,
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub width: Option<usize>,
    pub init: Option<String>,
    /// Verify only: resolution of the catalog and check-name filters.
    pub h: Option<f64>,
    pub checks: Option<Vec<String>>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub domain: Option<ShapeSpec>,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub output: OutputSection,
    pub thresholds: Option<Thresholds>,
}

/// Flag values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub kind: Option<SolverKind>,
    pub h: Option<f64>,
    pub ell: Option<f64>,
    pub schedule: Option<Vec<f64>>,
    pub p_list: Option<Vec<f64>>,
    pub lambda: Option<f64>,
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub width: Option<usize>,
    pub init: Option<String>,
    pub checks: Option<Vec<String>>,
    pub out: Option<PathBuf>,
}

/// A configuration problem, pinned to the offending key and, when it comes
/// from the file, its line.
#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostic {
    pub file: Option<PathBuf>,
    pub line: Option<usize>,
    pub key: String,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (&self.file, self.line) {
            (Some(p), Some(l)) => write!(f, "{}:{l}: ", p.display())?,
            (Some(p), None) => write!(f, "{}: ", p.display())?,
            _ => {}
        }
        write!(f, "`{}`: {}", self.key, self.message)
    }
}

impl std::error::Error for Diagnostic {}

/// 1-based line of `key` inside `[section]`, by a plain scan of the text.
pub fn locate(text: &str, section: &str, key: &str) -> Option<usize> {
    let mut current = String::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if let Some(rest) = line.strip_prefix('[') {
            current = rest.trim_end_matches(']').trim().to_string();
            continue;
        }
        if current != section {
            continue;
        }
        if let Some((k, _)) = line.split_once('=') {
            if k.trim() == key {
                return Some(n + 1);
            }
        }
    }
    None
}

pub struct Source {
    pub path: Option<PathBuf>,
    pub text: String,
}

impl Source {
    fn diag(&self, key: &str, message: impl Into<String>) -> Diagnostic {
        let (section, name) = key.split_once('.').unwrap_or(("", key));
        Diagnostic {
            file: self.path.clone(),
            line: locate(&self.text, section, name),
            key: key.to_string(),
            message: message.into(),
        }
    }
}

pub fn load(path: &Path) -> Result<(FileConfig, Source), Diagnostic> {
    let text = std::fs::read_to_string(path).map_err(|e| Diagnostic {
        file: Some(path.to_path_buf()),
        line: None,
        key: "<file>".into(),
        message: e.to_string(),
    })?;
    let src = Source {
        path: Some(path.to_path_buf()),
        text,
    };
    let cfg = parse(&src)?;
    Ok((cfg, src))
}

pub fn parse(src: &Source) -> Result<FileConfig, Diagnostic> {
    toml::from_str(&src.text).map_err(|e| {
        let line = e.span().map(|s| {
            src.text[..s.start.min(src.text.len())]
                .matches('\n')
                .count()
                + 1
        });
        Diagnostic {
            file: src.path.clone(),
            line,
            key: "<toml>".into(),
            message: e.message().to_string(),
        }
    })
}

/// The fully resolved, validated run. Serializes canonically: only the
/// fields the selected solver reads, with every default filled in.
#[derive(Debug, Clone, Serialize)]
pub struct Resolved {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub domain: Option<ShapeSpec>,
    pub task: Task,
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "solver", rename_all = "kebab-case")]
pub enum Task {
    PqSweep {
        ell: f64,
        p_list: Vec<f64>,
        tol: Option<f64>,
        max_iter: usize,
    },
    Concave {
        ell: f64,
        lambda: f64,
        tol: f64,
        max_sweeps: usize,
        width: usize,
    },
    Maximal {
        schedule: Vec<f64>,
        lambda: f64,
        tol: f64,
        max_sweeps: usize,
        width: usize,
    },
    EigenL1 {
        lambda: f64,
        tol: f64,
        max_sweeps: usize,
        width: usize,
        init: String,
    },
    Export {
        ridge_tolerance: f64,
    },
    Verify {
        h: f64,
        checks: Vec<String>,
        thresholds: Thresholds,
    },
}

impl Task {
    pub fn name(&self) -> &'static str {
        match self {
            Task::PqSweep { .. } => "pq-sweep",
            Task::Concave { .. } => "concave",
            Task::Maximal { .. } => "maximal",
            Task::EigenL1 { .. } => "eigen-l1",
            Task::Export { .. } => "export",
            Task::Verify { .. } => "verify",
        }
    }
}

impl Resolved {
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("plain data serializes")
    }

    /// SHA-256 of [`Resolved::canonical_json`]; the output directory is not
    /// part of it.
    pub fn hash(&self) -> String {
        format!("{:x}", Sha256::digest(self.canonical_json().as_bytes()))
    }

    pub fn build_domain(&self) -> anyhow::Result<Option<Arc<GridDomain>>> {
        Ok(match &self.domain {
            Some(s) => Some(Arc::new(make_domain(s)?)),
            None => None,
        })
    }
}

const INITS: [&str; 3] = ["distance", "left_bulb", "right_bulb"];
const CHECK_FAMILIES: [&str; 7] = [
    "all",
    "theorem1",
    "theorem2",
    "theorem3",
    "example_ball",
    "remark",
    "conjecture",
];

/// Merges flags over the file, checks every precondition and fills in
/// defaults. Nothing expensive runs before this succeeds.
pub fn resolve(file: FileConfig, src: &Source, ov: &Overrides) -> Result<Resolved, Diagnostic> {
    let s = file.solver;
    let kind = ov.kind.or(s.kind).ok_or_else(|| {
        src.diag(
            "solver.kind",
            "missing; one of pq-sweep, concave, maximal, eigen-l1, export, verify",
        )
    })?;
    let out = ov.out.clone().or(file.output.dir);
    let tol = ov.tol.or(s.tol);
    let max_iter = ov.max_iter.or(s.max_iter);
    let lambda = ov.lambda.or(s.lambda);
    let width = ov.width.or(s.width).unwrap_or(DEFAULT_WIDTH);

    if let Some(t) = tol {
        if !(t.is_finite() && t > 0.0) {
            return Err(src.diag("solver.tol", format!("{t} is not a positive finite number")));
        }
    }
    if max_iter == Some(0) {
        return Err(src.diag("solver.max_iter", "must be at least 1"));
    }
    if let Some(l) = lambda {
        if !(l.is_finite() && l > 0.0) {
            return Err(src.diag(
                "solver.lambda",
                format!("{l} is not a positive finite number"),
            ));
        }
    }
    if !(1..=2).contains(&width) {
        return Err(src.diag(
            "solver.width",
            format!("{width} is outside the supported range 1..=2"),
        ));
    }

    if kind == SolverKind::Verify {
        let h = ov.h.or(s.h).unwrap_or(0.02);
        if !(h.is_finite() && h > 0.0 && h <= 0.2) {
            return Err(src.diag("solver.h", format!("{h} must lie in (0, 0.2]")));
        }
        let checks = ov
            .checks
            .clone()
            .or(s.checks)
            .unwrap_or_else(|| vec!["all".into()]);
        for c in &checks {
            if !CHECK_FAMILIES.iter().any(|f| c.starts_with(f)) {
                return Err(src.diag(
                    "solver.checks",
                    format!("unknown check `{c}`; expected a name starting with one of {CHECK_FAMILIES:?}"),
                ));
            }
        }
        return Ok(Resolved {
            domain: None,
            task: Task::Verify {
                h,
                checks,
                thresholds: file.thresholds.unwrap_or_default(),
            },
            out,
        });
    }

    let mut spec = file
        .domain
        .ok_or_else(|| src.diag("domain.kind", "a [domain] table is required"))?;
    if let Some(h) = ov.h {
        spec.h = h;
    }
    let domain = make_domain(&spec).map_err(|e| src.diag("domain.h", e.to_string()))?;
    let domain = Arc::new(domain);
    let grid_lambda = || -> Result<f64, Diagnostic> {
        let r = inradius(&distance_transform(&domain))
            .map_err(|e| src.diag("domain.kind", e.to_string()))?;
        Ok(lambda.unwrap_or(1.0 / r))
    };
    let open_unit = |key: &str, v: f64| -> Result<f64, Diagnostic> {
        if v > 0.0 && v < 1.0 {
            Ok(v)
        } else {
            Err(src.diag(key, format!("{v} is outside the admissible range (0, 1)")))
        }
    };
    let ell = ov.ell.or(s.ell);

    let task = match kind {
        SolverKind::PqSweep => {
            let ell = open_unit("solver.ell", ell.unwrap_or(0.5))?;
            let p_list = ov
                .p_list
                .clone()
                .or(s.p_list)
                .unwrap_or_else(|| vec![10.0, 20.0, 40.0, 80.0]);
            if p_list.is_empty() {
                return Err(src.diag("solver.p_list", "must not be empty"));
            }
            for (i, &p) in p_list.iter().enumerate() {
                if !(p.is_finite() && p >= 4.0) || (i > 0 && p <= p_list[i - 1]) {
                    return Err(src.diag(
                        "solver.p_list",
                        format!("entry {p}: exponents must be >= 4 and strictly increasing"),
                    ));
                }
            }
            Task::PqSweep {
                ell,
                p_list,
                tol,
                max_iter: max_iter.unwrap_or(infeig::plap::DEFAULT_MAX_ITER),
            }
        }
        SolverKind::Concave => {
            let ell = ell.ok_or_else(|| {
                src.diag("solver.ell", "required for the concave solver, in (0, 1)")
            })?;
            Task::Concave {
                ell: open_unit("solver.ell", ell)?,
                lambda: grid_lambda()?,
                tol: tol.unwrap_or(1e-7),
                max_sweeps: max_iter.unwrap_or(200_000),
                width,
            }
        }
        SolverKind::Maximal => {
            let schedule = ov
                .schedule
                .clone()
                .or(s.schedule)
                .unwrap_or_else(|| DEFAULT_SCHEDULE.to_vec());
            if schedule.is_empty() {
                return Err(src.diag("solver.schedule", "must not be empty"));
            }
            for (i, &l) in schedule.iter().enumerate() {
                open_unit("solver.schedule", l)?;
                if i > 0 && l <= schedule[i - 1] {
                    return Err(src.diag(
                        "solver.schedule",
                        format!("entry {l}: must be strictly increasing"),
                    ));
                }
            }
            Task::Maximal {
                schedule,
                lambda: grid_lambda()?,
                tol: tol.unwrap_or(1e-7),
                max_sweeps: max_iter.unwrap_or(200_000),
                width,
            }
        }
        SolverKind::EigenL1 => {
            let init = ov
                .init
                .clone()
                .or(s.init)
                .unwrap_or_else(|| "distance".into());
            if !INITS.contains(&init.as_str()) {
                return Err(src.diag("solver.init", format!("`{init}` is not one of {INITS:?}")));
            }
            if init != "distance" && !matches!(spec.shape, Shape::Dumbbell { .. }) {
                return Err(src.diag("solver.init", format!("`{init}` needs a dumbbell domain")));
            }
            Task::EigenL1 {
                lambda: grid_lambda()?,
                tol: tol.unwrap_or(1e-7),
                max_sweeps: max_iter.unwrap_or(200_000),
                width,
                init,
            }
        }
        SolverKind::Export => Task::Export {
            ridge_tolerance: default_ridge_tolerance(&domain),
        },
        SolverKind::Verify => unreachable!(),
    };
    Ok(Resolved {
        domain: Some(spec),
        task,
        out,
    })
}
