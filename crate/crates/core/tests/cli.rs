use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_platoon-merge"))
}

fn manifest(rel: &str) -> String {
    format!("{}/{rel}", env!("CARGO_MANIFEST_DIR"))
}

fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn all_modes_write_every_output() {
    let out = tempfile::tempdir().unwrap();
    let status = bin()
        .args(["run", "--mode", "all", "--horizon", "240", "--config"])
        .arg(manifest("scenarios/onramp_560m.toml"))
        .arg("--out-dir")
        .arg(out.path())
        .output()
        .unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    for mode in ["baseline1", "baseline2", "optimal"] {
        for name in [format!("trace_{mode}.csv"), format!("summary_{mode}.json"), format!("events_{mode}.json")] {
            assert!(out.path().join(&name).is_file(), "missing {name}");
        }
        let summary = read_json(&out.path().join(format!("summary_{mode}.json")));
        assert_eq!(summary["mode"], mode);
        assert_eq!(summary["violation_count"], 0);
    }
    let table = std::fs::read_to_string(out.path().join("comparison.txt")).unwrap();
    assert!(table.contains("Avg. travel time"));
    let header = std::fs::read_to_string(out.path().join("trace_optimal.csv")).unwrap();
    assert!(header.starts_with("t,id,platoon,j,road,mode,p,v,u,fuel_rate\n"));
}

#[test]
fn bad_plan_fixture_exits_nonzero_with_rear_end_report() {
    let out = tempfile::tempdir().unwrap();
    let status = bin()
        .args(["run", "--mode", "optimal", "--audit-only", "--emit-trace", "false", "--config"])
        .arg(manifest("fixtures/bad_plan.toml"))
        .arg("--out-dir")
        .arg(out.path())
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(1));
    let report = read_json(&out.path().join("violations_optimal.json"));
    assert_eq!(report["error"], "constraint_violation");
    let kinds: Vec<&str> =
        report["violations"].as_array().unwrap().iter().map(|v| v["kind"].as_str().unwrap()).collect();
    assert!(kinds.contains(&"rear_end"), "{kinds:?}");
}

#[test]
fn strict_mode_aborts_on_first_breach() {
    let out = tempfile::tempdir().unwrap();
    let status = bin()
        .args(["run", "--mode", "optimal", "--emit-trace", "false", "--config"])
        .arg(manifest("fixtures/bad_plan.toml"))
        .arg("--out-dir")
        .arg(out.path())
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(1));
    let report = read_json(&out.path().join("violations_optimal.json"));
    assert_eq!(report["violations"][0]["kind"], "rear_end");
    assert!(!out.path().join("summary_optimal.json").exists());
}

#[test]
fn missing_config_is_a_config_error() {
    let out = tempfile::tempdir().unwrap();
    let status =
        bin().args(["run", "--config", "/nonexistent/scenario.toml", "--out-dir"]).arg(out.path()).status().unwrap();
    assert_eq!(status.code(), Some(2));
    let report = read_json(&out.path().join("error.json"));
    assert_eq!(report["error"], "config");
}

#[test]
fn default_config_round_trips() {
    let output = bin().arg("default-config").output().unwrap();
    assert!(output.status.success());
    let text = String::from_utf8(output.stdout).unwrap();
    let parsed = platoon_merge::ScenarioConfig::from_toml_str(&text, "stdout").unwrap();
    assert_eq!(parsed, platoon_merge::ScenarioConfig::default());
}

#[test]
fn shipped_scenario_matches_defaults() {
    let shipped = platoon_merge::ScenarioConfig::load(manifest("scenarios/onramp_560m.toml")).unwrap();
    assert_eq!(shipped, platoon_merge::ScenarioConfig::default());
}
