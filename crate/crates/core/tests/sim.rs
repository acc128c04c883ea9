use std::path::PathBuf;

use serde_json::{json, Value};
use teamloc::localization::GateStatus;
use teamloc::sim::{emit_metrics, plan_only, run, Phase, RunStatus, Scenario, SimError};

fn scenario_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(format!("{name}.json"))
}

fn scenario_value(name: &str) -> Value {
    serde_json::from_str(&std::fs::read_to_string(scenario_path(name)).unwrap()).unwrap()
}

fn parse(v: &Value) -> Result<Scenario, SimError> {
    Scenario::from_json(&v.to_string())
}

fn invariant_field(err: SimError) -> (String, String) {
    match err {
        SimError::Invariant { field, message } => (field, message),
        other => panic!("expected an invariant error, got {other:?}"),
    }
}

#[test]
fn minimal_team_has_one_vertex_per_device() {
    let mut v = scenario_value("demo");
    v["robots"].as_array_mut().unwrap().truncate(2);
    v["planning"] = json!(false);
    let scn = parse(&v).unwrap();
    assert_eq!(scn.n_vertices(), 4);
    assert_eq!(run(&scn).kinds.len(), 4);
}

#[test]
fn fewer_mavs_than_ugvs_is_rejected() {
    let mut v = scenario_value("demo");
    let robots = v["robots"].as_array_mut().unwrap();
    robots.truncate(2);
    robots.push(json!({ "kind": "ugv", "position": { "x": 0.0, "y": 2.0 }, "yaw": 0.0 }));
    let (_, message) = invariant_field(parse(&v).unwrap_err());
    assert!(message.contains("assumption (i)"), "{message}");
}

#[test]
fn non_positive_time_step_names_the_field() {
    let mut v = scenario_value("demo");
    v["dt"] = json!(0.0);
    let (field, _) = invariant_field(parse(&v).unwrap_err());
    assert_eq!(field, "dt");
}

#[test]
fn malformed_json_reports_a_position() {
    match Scenario::from_json("{\n  \"robots\": [,]\n}") {
        Err(SimError::Parse { line, .. }) => assert_eq!(line, 2),
        other => panic!("expected a parse error, got {other:?}"),
    }
}

#[test]
fn one_record_per_step() {
    let mut v = scenario_value("demo");
    v["duration"] = json!(3.05);
    let trace = run(&parse(&v).unwrap());
    assert_eq!(trace.records.len(), 31);
    assert!(trace.records.windows(2).all(|w| w[1].step == w[0].step + 1));
}

#[test]
fn two_steps_give_two_eigenvalue_rows() {
    let mut v = scenario_value("demo");
    v["duration"] = json!(0.2);
    let trace = run(&parse(&v).unwrap());
    let dir = tempfile::tempdir().unwrap();
    let summary = emit_metrics(&trace, dir.path()).unwrap();
    assert_eq!(summary.steps, 2);
    let text = std::fs::read_to_string(dir.path().join("eigenvalue.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 3);
    assert_eq!(lines[0], "t,lambda4");
    for name in ["poses.csv", "separation.csv", "profiles.csv", "tours.csv", "summary.json", "trace.json"] {
        assert!(dir.path().join(name).exists(), "{name} missing");
    }
}

#[test]
fn noiseless_run_localizes_exactly_and_keeps_the_fov() {
    let scn = Scenario::load(scenario_path("noiseless")).unwrap();
    let trace = run(&scn);
    assert_eq!(trace.status, RunStatus::Completed);
    let last = trace.records.iter().rev().find_map(|r| r.rmse).unwrap();
    assert!(last < 1e-6, "rmse {last}");
    let plan = trace.plan.as_ref().unwrap();
    assert!(plan.max_separation <= std::f64::consts::FRAC_PI_2 + 1e-9);
    let flown = trace.records.iter().filter_map(|r| r.separation).fold(0.0, f64::max);
    assert!(flown <= std::f64::consts::FRAC_PI_2 + 1e-9, "{flown}");
}

#[test]
fn noisy_demo_tracks_the_world_frame() {
    let scn = Scenario::load(scenario_path("demo")).unwrap();
    let trace = run(&scn);
    assert_eq!(trace.status, RunStatus::Completed);
    assert!(trace.records.iter().any(|r| r.phase == Phase::Flying));
    let last = trace.records.last().unwrap();
    let est = last.estimate.as_ref().unwrap();
    let worst = est.iter().zip(&last.truth).map(|(e, t)| e.position.xy().dist(t.position.xy())).fold(0.0, f64::max);
    assert!(worst < 0.5, "world-frame error {worst}");
}

#[test]
fn losing_a_transceiver_degrades_the_estimate() {
    let scn = Scenario::load(scenario_path("transceiver_loss")).unwrap();
    let trace = run(&scn);
    let before = trace.records.iter().filter(|r| r.t < 4.95);
    assert!(before.clone().any(|r| r.gate == GateStatus::Localizing));
    let after: Vec<_> = trace.records.iter().filter(|r| r.t > 5.05).collect();
    assert!(!after.is_empty());
    assert!(after.iter().all(|r| r.degraded && r.gate != GateStatus::Localizing && r.rigidity_eigenvalue < 1e-6));
}

#[test]
fn runs_and_plans_are_deterministic() {
    let mut v = scenario_value("demo");
    v["duration"] = json!(12.0);
    let scn = parse(&v).unwrap();
    assert_eq!(run(&scn).to_json(), run(&scn).to_json());
    let a = plan_only(&scn).unwrap();
    let b = plan_only(&scn).unwrap();
    assert_eq!(a.plan, b.plan);
    assert!(!a.neighborhoods.is_empty());
}

#[test]
fn scenario_survives_a_json_round_trip() {
    let scn = Scenario::load(scenario_path("demo")).unwrap();
    assert_eq!(Scenario::from_json(&scn.to_json()).unwrap(), scn);
}
