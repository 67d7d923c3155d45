mod config;
mod run;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{Diagnostic, FileConfig, Overrides, Resolved, SolverKind, Source};

#[derive(Parser)]
#[command(name = "infeig", version, about = "Infinity-eigenvalue grid solvers")]
struct Cli {
    /// Worker threads for data-parallel kernels and concurrent checks.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Resolve and validate the configuration, print it with its hash, and stop.
    #[arg(long, global = true)]
    dry_run: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one problem: concave, maximal or eigen-l1.
    Solve {
        config: PathBuf,
        /// Overrides `solver.kind`.
        #[arg(long, value_parser = ["concave", "maximal", "eigen-l1"])]
        solver: Option<String>,
        #[command(flatten)]
        flags: Flags,
    },
    /// Warm-started sweep in p with q = ceil(ell p).
    Sweep {
        config: PathBuf,
        #[command(flatten)]
        flags: Flags,
    },
    /// Run the verification checks: `all`, a check-name prefix, or a config file.
    Verify {
        #[arg(default_value = "all")]
        target: String,
        #[command(flatten)]
        flags: Flags,
    },
    /// Distance field, ridge and max-set renders of the configured domain.
    Export {
        config: PathBuf,
        #[command(flatten)]
        flags: Flags,
    },
}

#[derive(Args, Default)]
struct Flags {
    #[arg(long)]
    h: Option<f64>,
    #[arg(long)]
    ell: Option<f64>,
    /// Comma-separated increasing ell values for `maximal`.
    #[arg(long, value_delimiter = ',')]
    schedule: Option<Vec<f64>>,
    /// Comma-separated increasing exponents for `sweep`.
    #[arg(long, value_delimiter = ',')]
    p_list: Option<Vec<f64>>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    width: Option<usize>,
    /// Initial field for eigen-l1: distance, left_bulb or right_bulb.
    #[arg(long)]
    init: Option<String>,
    /// Output directory; defaults to `$INFEIG_OUT/<name>`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Default output root.
    #[arg(long, env = "INFEIG_OUT", default_value = "infeig-out")]
    out_root: PathBuf,
}

impl Flags {
    fn overrides(&self, kind: Option<SolverKind>) -> Overrides {
        Overrides {
            kind,
            h: self.h,
            ell: self.ell,
            schedule: self.schedule.clone(),
            p_list: self.p_list.clone(),
            lambda: self.lambda,
            tol: self.tol,
            max_iter: self.max_iter,
            width: self.width,
            init: self.init.clone(),
            checks: None,
            out: self.out.clone(),
        }
    }
}

fn stem(p: &Path) -> String {
    p.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "run".into())
}

fn from_file(path: &Path, ov: &Overrides) -> Result<Resolved, Diagnostic> {
    let (file, src) = config::load(path)?;
    config::resolve(file, &src, ov)
}

fn prepare(cli: &Cli) -> Result<(Resolved, PathBuf), Diagnostic> {
    let (resolved, name, root) = match &cli.command {
        Command::Solve {
            config,
            solver,
            flags,
        } => {
            let kind = solver.as_deref().and_then(SolverKind::parse);
            let r = from_file(config, &flags.overrides(kind))?;
            if !matches!(r.task.name(), "concave" | "maximal" | "eigen-l1") {
                return Err(Diagnostic {
                    file: Some(config.clone()),
                    line: None,
                    key: "solver.kind".into(),
                    message: format!(
                        "`{}` is not a solve pipeline; use concave, maximal or eigen-l1",
                        r.task.name()
                    ),
                });
            }
            (r, stem(config), flags.out_root.clone())
        }
        Command::Sweep { config, flags } => (
            from_file(config, &flags.overrides(Some(SolverKind::PqSweep)))?,
            stem(config),
            flags.out_root.clone(),
        ),
        Command::Export { config, flags } => (
            from_file(config, &flags.overrides(Some(SolverKind::Export)))?,
            format!("{}-export", stem(config)),
            flags.out_root.clone(),
        ),
        Command::Verify { target, flags } => {
            let mut ov = flags.overrides(Some(SolverKind::Verify));
            let path = Path::new(target);
            if path.extension().is_some_and(|e| e == "toml") {
                (from_file(path, &ov)?, stem(path), flags.out_root.clone())
            } else {
                ov.checks = Some(vec![target.clone()]);
                let src = Source {
                    path: None,
                    text: String::new(),
                };
                (
                    config::resolve(FileConfig::default(), &src, &ov)?,
                    format!("verify-{target}"),
                    flags.out_root.clone(),
                )
            }
        }
    };
    let out = resolved.out.clone().unwrap_or_else(|| root.join(name));
    Ok((resolved, out))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (cfg, out) = match prepare(&cli) {
        Ok(x) => x,
        Err(d) => {
            eprintln!("error: {d}");
            return ExitCode::from(2);
        }
    };
    if cli.dry_run {
        println!("{}", cfg.canonical_json());
        println!("hash {}", cfg.hash());
        println!("out {}", out.display());
        return ExitCode::SUCCESS;
    }
    let pool = match rayon::ThreadPoolBuilder::new()
        .num_threads(cli.jobs.unwrap_or(0))
        .build()
    {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(2);
        }
    };
    let mut em = match run::Emitter::new(&out) {
        Ok(e) => e,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(1);
        }
    };
    let outcome = pool.install(|| run::execute(&cfg, &mut em));
    if let Err(e) = em.finish(&cfg, &outcome) {
        eprintln!("error: writing manifest: {e:#}");
        return ExitCode::from(1);
    }
    match outcome {
        Ok(true) => {
            println!("{} -> {}", cfg.task.name(), out.display());
            ExitCode::SUCCESS
        }
        Ok(false) => {
            eprintln!("some applicable checks failed; see {}", out.display());
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
