use std::path::PathBuf;
use std::process::{Command, Output};

fn fixture(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

fn links(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_links"))
        .args(args)
        .env_remove("RUST_LOG")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = links(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn json(args: &[&str]) -> serde_json::Value {
    serde_json::from_str(&ok(args)).unwrap()
}

#[test]
fn simulate_prints_matrices() {
    let v = json(&["simulate", "--scenario", &fixture("scenario.json"), "--seed", "3"]);
    assert_eq!(v["seed"], 3);
    let gains = v["gains"].as_array().unwrap();
    assert_eq!(gains.len(), 4);
    assert_eq!(gains[0].as_array().unwrap().len(), 12);
    assert_eq!(v["rates_bps"].as_array().unwrap().len(), 4);
}

#[test]
fn solve_with_each_solver() {
    for solver in ["auto", "exact", "heuristic"] {
        let v = json(&["solve", "--scenario", &fixture("scenario.json"), "--solver", solver]);
        assert_eq!(v["feasible"], true, "{solver}");
        assert!(v["max_delay_s"].as_f64().unwrap() > 0.0);
    }
}

#[test]
fn plan_scores_against_gold() {
    let v = json(&["plan", "--config", &fixture("pipeline.json")]);
    assert_eq!(v["plan_accuracy"], 1.0);
    assert!(!v["plan"]["entries"].as_array().unwrap().is_empty());
}

#[test]
fn predict_with_holdout() {
    let v = json(&[
        "predict",
        "--traffic",
        &fixture("traffic.csv"),
        "--cell",
        "4259",
        "--capacity",
        "1000",
        "--predictor",
        "seasonal-naive",
        "--holdout",
    ]);
    assert_eq!(v["bucket_minutes"], 10);
    assert_eq!(v["forecast"].as_array().unwrap().len(), 60);
    assert!(v["nrmse"].as_f64().unwrap() >= 0.0);
}

#[test]
fn pipeline_output_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.json"), dir.path().join("b.json"));
    for path in [&a, &b] {
        ok(&["pipeline", "--config", &fixture("pipeline.json"), "--seed", "9", "--out", path.to_str().unwrap()]);
    }
    let (a, b) = (std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
    assert!(!a.is_empty());
    assert_eq!(a, b);
    let v: serde_json::Value = serde_json::from_slice(&a).unwrap();
    assert!(v["max_latency_s"].as_f64().unwrap() > 0.0);
}

#[test]
fn sweep_csv_is_monotone() {
    let text = ok(&["sweep-tau", "--config", &fixture("pipeline.json"), "--seed", "7"]);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("tau,max_latency_s,n_cellular,n_zigbee"));
    let latency: Vec<f64> = lines.map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert_eq!(latency.len(), 6);
    assert!(latency.windows(2).all(|w| w[1] <= w[0]));
    assert!(latency[0] / latency[5] >= 2.0);
}

#[test]
fn eval_accuracy_writes_one_row_per_query() {
    let text = ok(&["eval-accuracy", "--fixture", &fixture("eval/queries.json")]);
    assert!(text.starts_with("query_id,f1,steps_used,status\n"));
    assert_eq!(text.lines().count(), 11);
}

#[test]
fn failures_exit_nonzero_and_name_the_stage() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.json");
    std::fs::write(&empty, "[]").unwrap();
    let out = links(&["pipeline", "--config", &fixture("pipeline.json"), "--script", empty.to_str().unwrap()]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("planning stage:"), "{err}");

    let out = links(&["pipeline", "--config", &fixture("nope.json")]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("config stage:"));

    let out = links(&["solve"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("--scenario"));
}
