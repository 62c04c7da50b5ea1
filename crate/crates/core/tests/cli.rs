use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use levyflow::LevyPath;

fn levyflow(args: &[&str], threads: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_levyflow"));
    cmd.args(args).env_remove("LEVYFLOW_THREADS");
    if let Some(t) = threads {
        cmd.env("LEVYFLOW_THREADS", t);
    }
    cmd.output().unwrap()
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

const SAMPLE: &str = r#"
experiment = "sample"

[model]
family = "isotropic_stable"
dim = 2
alpha = 1.2

[grid]
n_steps = 64

[sample]
n_paths = 3

[output]
write_paths = true
"#;

const LP_STRICT: &str = r#"
experiment = "verify-lp"

[model]
family = "isotropic_stable"
alpha = 1.5

[drift]
kind = "holder_power"
beta = 0.5

[grid]
n_steps = 256

[lp]
n_paths = 20

[thresholds]
max_ratio_spread = 0.5
"#;

#[test]
fn describe_known_and_unknown_tags() {
    let ok = levyflow(&["describe", "tanaka-grid"], None);
    assert_eq!(ok.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&ok.stdout).contains("tanaka-grid"));
    let bad = levyflow(&["describe", "bogus"], None);
    assert_eq!(bad.status.code(), Some(1));
    let err = String::from_utf8_lossy(&bad.stderr);
    assert!(err.contains("verify-flow") && err.contains("kolmogorov-lambda0"), "{err}");
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(levyflow(&["--bogus"], None).status.code(), Some(1));
    assert_eq!(levyflow(&[], None).status.code(), Some(1));
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "s.toml", SAMPLE);
    let out = dir.path().join("o");
    let r = levyflow(
        &["--config", &cfg, "--out", out.to_str().unwrap(), "--threads", "0"],
        None,
    );
    assert_eq!(r.status.code(), Some(1));
}

#[test]
fn missing_alpha_is_reported_by_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "s.toml", &SAMPLE.replace("alpha = 1.2\n", ""));
    let r = levyflow(&["--config", &cfg, "--out", dir.path().to_str().unwrap()], None);
    assert_eq!(r.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&r.stderr).contains("model.alpha"));
}

#[test]
fn sample_writes_reports_and_paths() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "s.toml", SAMPLE);
    let out = dir.path().join("o");
    let r = levyflow(
        &["--config", &cfg, "--out", out.to_str().unwrap(), "--seed", "5"],
        None,
    );
    assert_eq!(r.status.code(), Some(0), "{}", String::from_utf8_lossy(&r.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["experiment"], "sample");
    assert_eq!(report["n_paths"], 3);
    assert!(report["schema_version"].is_u64());
    assert_eq!(report["config_snapshot"]["seeds"]["master"], 5);
    assert!(fs::read_to_string(out.join("report.csv"))
        .unwrap()
        .starts_with("schema_version"));
    let mut archives: Vec<_> = fs::read_dir(out.join("paths"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "lvyp"))
        .collect();
    archives.sort();
    assert_eq!(archives.len(), 3);
    let p = LevyPath::read_archive(fs::File::open(&archives[0]).unwrap()).unwrap();
    assert_eq!(p.dim, 2);
    assert_eq!(p.n_nodes(), 65);
    let csv = fs::read_to_string(archives[0].with_extension("csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "t,L_1,L_2");
    assert_eq!(csv.lines().count(), 66);
}

#[test]
fn csv_only_format() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "s.toml", SAMPLE);
    let out = dir.path().join("o");
    let r = levyflow(
        &["--config", &cfg, "--out", out.to_str().unwrap(), "--format", "csv"],
        None,
    );
    assert_eq!(r.status.code(), Some(0));
    assert!(out.join("report.csv").exists());
    assert!(!out.join("report.json").exists());
}

#[test]
fn failed_verdict_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "lp.toml", LP_STRICT);
    let out = dir.path().join("o");
    let r = levyflow(&["--config", &cfg, "--out", out.to_str().unwrap()], None);
    assert_eq!(r.status.code(), Some(2), "{}", String::from_utf8_lossy(&r.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["pass"], false);
}

#[test]
fn reports_do_not_depend_on_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "lp.toml", LP_STRICT);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    levyflow(&["--config", &cfg, "--out", a.to_str().unwrap()], Some("1"));
    levyflow(
        &["--config", &cfg, "--out", b.to_str().unwrap(), "--threads", "3"],
        None,
    );
    for f in ["report.json", "report.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}
