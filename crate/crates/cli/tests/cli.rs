use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

fn teamloc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_teamloc")).args(args).output().expect("binary runs")
}

fn demo() -> Value {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios/demo.json");
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

fn short_demo(dir: &Path) -> String {
    let mut v = demo();
    v["duration"] = json!(8.0);
    write(dir, "short.json", &v.to_string())
}

#[test]
fn run_writes_outputs_and_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = short_demo(dir.path());
    let out = dir.path().join("out");
    let o = teamloc(&["run", "--scenario", &scenario, "--seed", "3", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let summary: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(summary["steps"], 80);
    for name in ["eigenvalue.csv", "poses.csv", "separation.csv", "profiles.csv", "tours.csv", "summary.json", "trace.json"] {
        assert!(out.join(name).exists(), "{name} missing");
    }
    let trace: Value = serde_json::from_str(&std::fs::read_to_string(out.join("trace.json")).unwrap()).unwrap();
    assert_eq!(trace["seed"], 3);
}

#[test]
fn plan_prints_neighborhoods_and_tours() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = short_demo(dir.path());
    for extra in [None, Some("--baseline")] {
        let mut args = vec!["plan", "--scenario", scenario.as_str()];
        args.extend(extra);
        let o = teamloc(&args);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        let body: Value = serde_json::from_slice(&o.stdout).unwrap();
        assert!(!body["neighborhoods"].as_array().unwrap().is_empty());
        assert_eq!(body["plan"]["tours"].as_array().unwrap().len(), 2);
    }
}

#[test]
fn rigidity_reports_triangle_and_path() {
    let dir = tempfile::tempdir().unwrap();
    let positions = json!([{ "x": 0.0, "y": 0.0 }, { "x": 1.0, "y": 0.0 }, { "x": 0.0, "y": 1.0 }]);
    let triangle = write(dir.path(), "k3.json", &json!({ "n": 3, "edges": [[0, 1], [1, 2], [0, 2]], "positions": positions }).to_string());
    let path = write(dir.path(), "p3.json", &json!({ "n": 3, "edges": [[0, 1], [1, 2]], "positions": positions }).to_string());

    let o = teamloc(&["rigidity", "--framework", &triangle]);
    assert_eq!(o.status.code(), Some(0));
    let r: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(r["is_rigid"], true);
    assert_eq!(r["rigidity_rank"], 3);

    let o = teamloc(&["rigidity", "--framework", &path]);
    let r: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(r["is_connected"], true);
    assert_eq!(r["is_rigid"], false);
}

#[test]
fn invariant_violation_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let mut v = demo();
    v["dt"] = json!(0.0);
    let scenario = write(dir.path(), "bad.json", &v.to_string());
    let o = teamloc(&["plan", "--scenario", &scenario]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("dt"));
}

#[test]
fn parse_and_io_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let broken = write(dir.path(), "broken.json", "{ \"robots\": ");
    assert_eq!(teamloc(&["plan", "--scenario", &broken]).status.code(), Some(1));
    let missing = dir.path().join("missing.json");
    assert_eq!(teamloc(&["rigidity", "--framework", missing.to_str().unwrap()]).status.code(), Some(1));
}

#[test]
fn infeasible_plan_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let mut v = demo();
    v["planner"]["fov"] = json!({ "horizontal_fov": 0.05, "vertical_fov": 0.438, "max_range": 30.0 });
    let scenario = write(dir.path(), "narrow.json", &v.to_string());
    let o = teamloc(&["plan", "--scenario", &scenario]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("infeasible"));
}
