use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn pcnet(args: &[&str], envs: &[(&str, &Path)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_pcnet"));
    cmd.args(args).env_remove("PCNET_OUT_DIR").env_remove("PCNET_MANIFEST");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().unwrap()
}

fn manifest() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/manifest.toml")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

/// The last stderr line must be a JSON object naming the error kind.
fn error_kind(o: &Output) -> String {
    assert!(!o.status.success());
    let err = String::from_utf8_lossy(&o.stderr);
    let line = err.lines().last().unwrap_or_default();
    let v: serde_json::Value = serde_json::from_str(line).unwrap_or_else(|_| panic!("not json: {line}"));
    assert!(v["message"].is_string());
    v["error"].as_str().unwrap().to_string()
}

fn write_config(dir: &Path) -> PathBuf {
    let path = dir.join("exp.toml");
    let text = format!(
        "manifest = {:?}\ndatasets = [\"glass\"]\narchitectures = [[6, 6]]\nconditions = [\"SC\", \"NFD\"]\ncircuit_counts = [2]\ntrials = 2\nbase_seed = 5\n[hyperparams]\nepochs = 2\n",
        manifest().display().to_string()
    );
    fs::write(&path, text).unwrap();
    path
}

#[test]
fn run_then_report_in_every_format() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let out = dir.path().join("out");
    let o = pcnet(
        &["run", "--config", cfg.to_str().unwrap(), "--jobs", "2"],
        &[("PCNET_OUT_DIR", &out)],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary: serde_json::Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    assert_eq!(summary["rows"], 3);
    let errors = fs::read_to_string(out.join("errors.csv")).unwrap();

    let fresh = dir.path().join("again");
    for (format, file) in [
        ("csv", "errors.csv"),
        ("markdown", "report.md"),
        ("plotdata", "curves.csv"),
    ] {
        let o = pcnet(
            &[
                "report",
                "--in",
                out.to_str().unwrap(),
                "--format",
                format,
                "--out",
                fresh.to_str().unwrap(),
            ],
            &[],
        );
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        assert!(stdout(&o).contains(file));
    }
    assert_eq!(fs::read_to_string(fresh.join("errors.csv")).unwrap(), errors);

    let again = pcnet(
        &["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()],
        &[],
    );
    assert_eq!(error_kind(&again), "config");
    let resumed = pcnet(
        &[
            "run",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--resume",
        ],
        &[],
    );
    assert!(resumed.status.success());
    assert_eq!(fs::read_to_string(out.join("errors.csv")).unwrap(), errors);
}

#[test]
fn gradcheck_passes_for_every_policy() {
    for policy in ["none", "nd", "nfd", "fd"] {
        let o = pcnet(
            &["gradcheck", "--arch", "5-8-8-3/2", "--policy", policy, "--seed", "9"],
            &[],
        );
        assert!(o.status.success(), "{policy}: {}", String::from_utf8_lossy(&o.stderr));
        let v: serde_json::Value = serde_json::from_str(stdout(&o).trim()).unwrap();
        assert!(v["max_relative_error"].as_f64().unwrap() < 1e-4);
    }
    let o = pcnet(&["gradcheck", "--arch", "5-8-8-3/1", "--policy", "nfd"], &[]);
    assert_eq!(error_kind(&o), "policy");
    let o = pcnet(&["gradcheck", "--arch", "5-8-x/2"], &[]);
    assert_eq!(error_kind(&o), "parameter");
}

#[test]
fn info_describes_bundled_data() {
    let o = pcnet(
        &["info", "--dataset", "breast-cancer"],
        &[("PCNET_MANIFEST", &manifest())],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["instances"], 683);
    assert_eq!(v["dropped_rows"], 16);
    assert_eq!(v["features"], 9);
    assert_eq!(v["classes"], 2);

    let o = pcnet(
        &[
            "info",
            "--dataset",
            "missing",
            "--manifest",
            manifest().to_str().unwrap(),
        ],
        &[],
    );
    assert_eq!(error_kind(&o), "config");
}

#[test]
fn usage_errors_are_machine_readable() {
    let o = pcnet(&["run"], &[]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(error_kind(&o), "usage");
    let o = pcnet(&["report", "--in", "/nonexistent", "--format", "pdf"], &[]);
    assert_eq!(error_kind(&o), "config");
    assert!(pcnet(&["--help"], &[]).status.success());
}
