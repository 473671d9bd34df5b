use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use qgibbs::harness::ExperimentConfig;

const SMALL: &str = r#"
seed = 7

[model]
preset = "transverse-ising"
J = 1.0
g = 1.0
beta = 0.8

[boxes]
sides = [2, 3, 4, 5]

[pb_gt]
pairs = 10
"#;

fn qgibbs(dir: &Path, args: &[&str]) -> Output {
    let cfg = dir.join("run.toml");
    if !cfg.exists() {
        fs::write(&cfg, SMALL).unwrap();
    }
    let out = dir.join("out");
    Command::new(env!("CARGO_BIN_EXE_qgibbs"))
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .args(args)
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn runs_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let first = qgibbs(dir.path(), &["pb-gt"]);
    assert_eq!(first.status.code(), Some(0), "{}", stderr(&first));
    let a = fs::read(dir.path().join("out/pb-gt-summary.json")).unwrap();
    let second = qgibbs(dir.path(), &["pb-gt"]);
    assert_eq!(second.status.code(), Some(0));
    let b = fs::read(dir.path().join("out/pb-gt-summary.json")).unwrap();
    assert_eq!(a, b);
    let summary: serde_json::Value = serde_json::from_slice(&a).unwrap();
    assert_eq!(summary["seed"], 7);
    assert_eq!(summary["config"]["pb_gt"]["pairs"], 10);
    assert!(summary["artifact_version"].as_str().unwrap().starts_with("qgibbs "));
}

#[test]
fn series_are_written_as_csv() {
    let dir = tempfile::tempdir().unwrap();
    let o = qgibbs(dir.path(), &["info-rate", "--beta", "0.5"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("out/info-rate-information-rate.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("volume,value"));
    assert_eq!(lines.count(), 4);
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out/info-rate-summary.json")).unwrap()).unwrap();
    assert_eq!(summary["config"]["model"]["beta"], 0.5);
    assert_eq!(summary["status"], "pass");
}

#[test]
fn failed_gate_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let o =qgibbs(dir.path(), &["--set", "tolerances.mean_field=-1.0", "--set", "mean_field.radial=2", "mean-field"]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
}

#[test]
fn drift_gate_makes_run_inconclusive() {
    let dir = tempfile::tempdir().unwrap();
    let o = qgibbs(dir.path(), &["rel-ent-density", "--set", "tolerances.drift_gate=1e-12"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out/rel-ent-density-summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary["status"], "inconclusive");
}

#[test]
fn config_errors_exit_three() {
    let dir = tempfile::tempdir().unwrap();
    let o = qgibbs(dir.path(), &["pressure", "--set", "buffer.widht=2"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("buffer"), "{}", stderr(&o));
    let o = qgibbs(dir.path(), &["pressure", "--set", "model.beta=\"hot\""]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("model"), "{}", stderr(&o));
    let o = qgibbs(dir.path(), &["pressure", "--boxes", "4,14"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("[-7,6]"), "{}", stderr(&o));
}

#[test]
fn example_config_is_valid() {
    let o = Command::new(env!("CARGO_BIN_EXE_qgibbs")).arg("example-config").output().unwrap();
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    let cfg = ExperimentConfig::from_toml(&text).unwrap();
    assert_eq!(cfg.model.beta, 0.8);
}
