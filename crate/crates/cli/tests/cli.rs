use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const MIXTURE: &str = r#"{"weights":[0.5,0.3,0.2],"components":[[0.64,0.32,0.04],[0.04,0.32,0.64],[0.24,0.32,0.44]]}"#;

fn groupmix(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_groupmix"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok_json(args: &[&str]) -> Value {
    let out = groupmix(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("json on stdout")
}

fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path
}

fn sample(dir: &Path, n: &str) -> PathBuf {
    let mix = write(dir, "mix.json", MIXTURE);
    let data = dir.join("groups.txt");
    let out = groupmix(&[
        "sample",
        "--mixture",
        mix.to_str().unwrap(),
        "--group-size",
        "5",
        "--n-groups",
        n,
        "--seed",
        "3",
        "--out",
        data.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    data
}

#[test]
fn sample_then_recover() {
    let dir = tempfile::tempdir().unwrap();
    let data = sample(dir.path(), "20000");
    let text = std::fs::read_to_string(&data).unwrap();
    assert_eq!(text.lines().count(), 20000);
    assert_eq!(text.lines().next().unwrap().split_whitespace().count(), 5);

    let fit = ok_json(&[
        "recover",
        "--data",
        data.to_str().unwrap(),
        "--m",
        "3",
        "--group-size",
        "5",
        "--dominating",
        "fixed:9,4,1",
        "--probe",
        "singular",
    ]);
    let comps = fit["components"].as_array().unwrap();
    assert_eq!(comps.len(), 3);
    let weights: f64 = fit["weights"]
        .as_array()
        .unwrap()
        .iter()
        .map(|w| w.as_f64().unwrap())
        .sum();
    assert!((weights - 1.0).abs() < 1e-9);
}

#[test]
fn recover_rejects_wrong_group_size() {
    let dir = tempfile::tempdir().unwrap();
    let data = sample(dir.path(), "100");
    let out = groupmix(&[
        "recover",
        "--data",
        data.to_str().unwrap(),
        "--m",
        "3",
        "--group-size",
        "4",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
}

#[test]
fn counterexample_reports_both_orders() {
    let report = ok_json(&["counterexample", "--m", "3", "--kind", "identifiability"]);
    let checks = report["checks"].as_array().unwrap();
    assert_eq!(checks[0]["order"], 4);
    assert_eq!(checks[0]["equal"], true);
    assert_eq!(checks[1]["order"], 5);
    assert_eq!(checks[1]["equal"], false);
    assert_eq!(report["t"], 6);

    let det = ok_json(&["counterexample", "--m", "2", "--kind", "determinedness"]);
    assert_eq!(det["t"], 5);
}

#[test]
fn multinomial_check_detects_equal_laws() {
    let dir = tempfile::tempdir().unwrap();
    let a = write(
        dir.path(),
        "a.json",
        r#"[{"weight":0.5,"trials":2,"p":[1.0,0.0]},{"weight":0.5,"trials":2,"p":[0.0,1.0]}]"#,
    );
    let b = write(
        dir.path(),
        "b.json",
        r#"[{"weight":1.0,"trials":2,"p":[0.5,0.5]}]"#,
    );
    let same = ok_json(&["multinomial-check", "--a", a.to_str().unwrap(), "--b", a.to_str().unwrap()]);
    assert_eq!(same["equal"], true);
    let diff = ok_json(&["multinomial-check", "--a", a.to_str().unwrap(), "--b", b.to_str().unwrap()]);
    assert_eq!(diff["equal"], false);
    assert!((diff["max_abs_diff"].as_f64().unwrap() - 0.25).abs() < 1e-12);
}

#[test]
fn rank_and_baseline() {
    let dir = tempfile::tempdir().unwrap();
    let data = sample(dir.path(), "50000");
    let rank = ok_json(&["rank", "--data", data.to_str().unwrap(), "--power", "1", "--tol", "1e-2"]);
    assert_eq!(rank["estimate"], 2);

    let truth = write(dir.path(), "truth.json", MIXTURE);
    let base = ok_json(&[
        "baseline",
        "--d",
        "3",
        "--m",
        "3",
        "--trials",
        "200",
        "--truth",
        truth.to_str().unwrap(),
    ]);
    assert_eq!(base["trials"], 200);
    let mean = base["mean"].as_f64().unwrap();
    assert!((0.3..0.8).contains(&mean));
}

#[test]
fn experiment_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "cfg.json",
        &format!(
            r#"{{"mixture":{MIXTURE},"group_size":5,"n_groups":5000,"reps":3,
                "dominating":"fixed:9,4,1","recovery":{{"m":3,"probe":"singular"}},"seed":1}}"#
        ),
    );
    let csv = dir.path().join("out.csv");
    let out = groupmix(&[
        "experiment",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "scheme,n_groups,rep,error,seconds");
    assert_eq!(lines.len(), 4);
    assert!(lines[1].starts_with("fixed:9,4,1,5000,0,"));
}

#[test]
fn bad_config_fails_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "cfg.json", "{ not json");
    let out = groupmix(&["experiment", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}
