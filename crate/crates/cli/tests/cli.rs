use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const DISK: &str = "[domain]
kind = \"disk\"
radius = 1.0
h = 0.1

[solver]
kind = \"concave\"
ell = 0.5
";

fn infeig(args: &[&str], root: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_infeig"))
        .args(args)
        .env("INFEIG_OUT", root)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn concave_solve_writes_fields_report_and_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "disk.toml", DISK);
    let o = infeig(&["solve", cfg.to_str().unwrap()], tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let out = tmp.path().join("disk");
    for f in ["v.csv", "v.pgm", "report.json", "manifest.json"] {
        assert!(out.join(f).exists(), "{f}");
    }
    assert!(!out.join("FAILED").exists());
    let m = manifest(&out);
    assert_eq!(m["status"], "ok");
    assert_eq!(m["solver"], "concave");
    assert_eq!(m["config"]["task"]["ell"], 0.5);
    assert_eq!(m["config_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn out_of_range_ell_is_rejected_before_any_work() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "bad.toml", &DISK.replace("0.5", "1.2"));
    let o = infeig(&["solve", cfg.to_str().unwrap()], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("bad.toml:8:"), "{err}");
    assert!(err.contains("solver.ell"), "{err}");
    assert!(err.contains("(0, 1)"), "{err}");
    assert!(!tmp.path().join("bad").exists());
}

#[test]
fn unknown_keys_are_located() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "typo.toml",
        &(DISK.to_string() + "tolerance = 1e-6\n"),
    );
    let o = infeig(&["solve", cfg.to_str().unwrap()], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(
        err.contains("typo.toml:9:") && err.contains("tolerance"),
        "{err}"
    );
}

#[test]
fn flags_override_the_file() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "disk.toml", DISK);
    let out = tmp.path().join("flagged");
    let o = infeig(
        &[
            "solve",
            cfg.to_str().unwrap(),
            "--ell",
            "0.7",
            "--h",
            "0.2",
            "--out",
            out.to_str().unwrap(),
        ],
        tmp.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let m = manifest(&out);
    assert_eq!(m["config"]["task"]["ell"], 0.7);
    assert_eq!(m["config"]["domain"]["h"], 0.2);
}

#[test]
fn reruns_are_byte_identical_and_hash_is_stable() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "disk.toml", DISK);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for (dir, jobs) in [(&a, "1"), (&b, "3")] {
        let o = infeig(
            &[
                "--jobs",
                jobs,
                "solve",
                cfg.to_str().unwrap(),
                "--out",
                dir.to_str().unwrap(),
            ],
            tmp.path(),
        );
        assert!(o.status.success(), "{}", stderr(&o));
    }
    for f in ["v.csv", "v.pgm"] {
        assert_eq!(
            std::fs::read(a.join(f)).unwrap(),
            std::fs::read(b.join(f)).unwrap(),
            "{f}"
        );
    }
    assert_eq!(manifest(&a)["config_hash"], manifest(&b)["config_hash"]);

    // spelling out a default does not change the hash; changing a value does
    let spelled = write_config(
        tmp.path(),
        "spelled.toml",
        &(DISK.to_string() + "tol = 1e-7\nwidth = 1\n"),
    );
    let c = tmp.path().join("c");
    let o = infeig(
        &[
            "solve",
            spelled.to_str().unwrap(),
            "--out",
            c.to_str().unwrap(),
        ],
        tmp.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(manifest(&a)["config_hash"], manifest(&c)["config_hash"]);
    let d = tmp.path().join("d");
    let o = infeig(
        &[
            "solve",
            cfg.to_str().unwrap(),
            "--tol",
            "1e-8",
            "--out",
            d.to_str().unwrap(),
        ],
        tmp.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert_ne!(manifest(&a)["config_hash"], manifest(&d)["config_hash"]);
}

#[test]
fn runtime_failure_leaves_a_marker() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "disk.toml", DISK);
    let out = tmp.path().join("blowup");
    let o = infeig(
        &[
            "solve",
            cfg.to_str().unwrap(),
            "--lambda",
            "1e300",
            "--out",
            out.to_str().unwrap(),
        ],
        tmp.path(),
    );
    assert_eq!(o.status.code(), Some(1));
    let marker = std::fs::read_to_string(out.join("FAILED")).unwrap();
    assert!(marker.contains("non-finite"), "{marker}");
    let m = manifest(&out);
    assert_eq!(m["status"], "failed");

    // a later successful run into the same directory clears the marker
    let o = infeig(
        &[
            "solve",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ],
        tmp.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(!out.join("FAILED").exists());
}

#[test]
fn export_renders_distance_and_ridge() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "disk.toml", DISK);
    let o = infeig(&["export", cfg.to_str().unwrap()], tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let out = tmp.path().join("disk-export");
    for f in ["distance.csv", "distance.pgm", "max_set.pgm", "ridge.json"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let ridge: Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("ridge.json")).unwrap()).unwrap();
    assert_eq!(ridge["ridge_equals_max"], true);
}

#[test]
fn sweep_and_eigen_pipelines_run() {
    let tmp = tempfile::tempdir().unwrap();
    let sweep = DISK.replace("kind = \"concave\"", "kind = \"pq-sweep\"") + "p_list = [4, 8]\n";
    let cfg = write_config(tmp.path(), "sweep.toml", &sweep);
    let o = infeig(&["sweep", cfg.to_str().unwrap()], tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let out = tmp.path().join("sweep");
    for f in ["sweep.csv", "u_p4.csv", "u_p8.pgm", "report.json"] {
        assert!(out.join(f).exists(), "{f}");
    }

    let cfg = write_config(tmp.path(), "eig.toml", DISK);
    let o = infeig(
        &["solve", cfg.to_str().unwrap(), "--solver", "eigen-l1"],
        tmp.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(tmp.path().join("eig/u.csv").exists());
    assert_eq!(manifest(&tmp.path().join("eig"))["solver"], "eigen-l1");
}

#[test]
fn init_other_than_distance_needs_a_dumbbell() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "disk.toml", DISK);
    let o = infeig(
        &[
            "solve",
            cfg.to_str().unwrap(),
            "--solver",
            "eigen-l1",
            "--init",
            "left_bulb",
        ],
        tmp.path(),
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("solver.init"), "{}", stderr(&o));
}

#[test]
fn verify_runs_a_filtered_check() {
    let tmp = tempfile::tempdir().unwrap();
    let o = infeig(&["verify", "example_ball", "--h", "0.1"], tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("[PASS] example_ball"), "{stdout}");
    let out = tmp.path().join("verify-example_ball");
    assert!(out.join("example_ball/report.json").exists());
    let summary: Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary.as_array().unwrap().len(), 1);
    assert_eq!(manifest(&out)["status"], "ok");
}

#[test]
fn unknown_check_names_are_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let o = infeig(&["verify", "bogus"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("solver.checks"), "{}", stderr(&o));
}

#[test]
fn dry_run_prints_the_resolved_config_and_writes_nothing() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "disk.toml", DISK);
    let o = infeig(&["--dry-run", "solve", cfg.to_str().unwrap()], tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let stdout = String::from_utf8_lossy(&o.stdout);
    let json: Value = serde_json::from_str(stdout.lines().next().unwrap()).unwrap();
    assert_eq!(json["task"]["solver"], "concave");
    assert_eq!(json["task"]["tol"], 1e-7);
    assert!(stdout.contains("hash "));
    assert!(!tmp.path().join("disk").exists());
}

#[test]
fn shipped_configs_resolve() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let tmp = tempfile::tempdir().unwrap();
    let mut n = 0;
    for entry in std::fs::read_dir(&dir).unwrap() {
        let p = entry.unwrap().path();
        if p.extension().is_none_or(|e| e != "toml") {
            continue;
        }
        n += 1;
        let text = std::fs::read_to_string(&p).unwrap();
        let sub = if text.contains("\"pq-sweep\"") {
            "sweep"
        } else if text.contains("\"export\"") {
            "export"
        } else if text.contains("\"verify\"") {
            "verify"
        } else {
            "solve"
        };
        let o = infeig(&["--dry-run", sub, p.to_str().unwrap()], tmp.path());
        assert!(o.status.success(), "{}: {}", p.display(), stderr(&o));
    }
    assert!(n >= 5);
}
