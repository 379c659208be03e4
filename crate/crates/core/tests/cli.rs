mod common;

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use common::scenario_dir;
use serde_json::Value;

fn agm(args: &[&str], scenario: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_agm"))
        .args(args)
        .arg("--scenario")
        .arg(scenario)
        .output()
        .unwrap()
}

fn report(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stderr)))
}

fn scenario(name: &str) -> PathBuf {
    scenario_dir().join(name)
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

/// Set `AGM_BLESS=1` to rewrite the golden file.
#[test]
fn zero_scenario_audit_matches_golden_file() {
    let out = agm(&["audit"], &scenario("zero2.json"));
    assert_eq!(out.status.code(), Some(0));
    let golden = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/audit_zero2.json");
    if std::env::var_os("AGM_BLESS").is_some() {
        std::fs::write(&golden, &out.stdout).unwrap();
    }
    let expected = std::fs::read(&golden).unwrap();
    assert!(out.stdout == expected, "report differs from {}", golden.display());
}

#[test]
fn generated_scenario_passes_the_audit() {
    let out = agm(&["audit"], &scenario("generated3.json"));
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    assert_eq!(r["summary"]["status"], "pass");
    let checks = r["checks"].as_array().unwrap();
    assert_eq!(checks.len(), 21);
    assert!(checks[..7].iter().all(|c| c["pass"] == true));
    assert_eq!(r["meta"]["readings"]["rho"], "auto");
    assert_eq!(r["meta"]["scenario_digest"].as_str().unwrap().len(), 64);
}

#[test]
fn check_reports_only_the_lower_identities() {
    let out = agm(&["check"], &scenario("generated3.json"));
    assert_eq!(out.status.code(), Some(0));
    let ids: Vec<String> = report(&out)["checks"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c["id"].as_str().unwrap().to_string())
        .collect();
    assert_eq!(ids, ["A1", "A2", "A3"]);
}

#[test]
fn corrupted_scenario_names_the_first_failure() {
    let out = agm(&["audit"], &scenario("corrupted3.json"));
    assert_eq!(out.status.code(), Some(1));
    let r = report(&out);
    assert_eq!(r["summary"]["first_failure"], "A2");
    let a3 = &r["checks"][2];
    assert_eq!(a3["pass"], false);
    assert_eq!(a3["inherited"], true);
}

#[test]
fn standard_curvature_flag_is_recorded_and_localized() {
    let out = agm(&["audit", "--curvature", "standard"], &scenario("generated3.json"));
    assert_eq!(out.status.code(), Some(1));
    let r = report(&out);
    assert_eq!(r["meta"]["curvature"], "standard");
    assert_eq!(r["summary"]["first_failure"], "A15");
}

#[test]
fn fd_mode_records_the_step() {
    let out = agm(&["check", "--mode", "fd", "--fd-step", "0.001"], &scenario("generated3.json"));
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    assert_eq!(r["meta"]["mode"], "fd");
    assert_eq!(r["meta"]["fd_step"], "1.0000000000000000e-3");
}

#[test]
fn invariants_carry_omega_symmetry() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(
        dir.path(),
        "s.json",
        r#"{"n": 2, "connection": {"1,1,2": "x1*x2", "2,2,1": "x1"},
            "instance": {"e": 1, "F": [["1", "0"], ["0", "-1"]], "sigma": ["x2", "0.5"]}}"#,
    );
    let out = agm(&["invariants", "--point=0.1,-0.2", "--extra"], &p);
    assert_eq!(out.status.code(), Some(0));
    let inv = &report(&out)["invariants"][0];
    assert_eq!(inv["point"][1], "-2.0000000000000001e-1");
    assert_eq!(inv["omega_symmetric"], true);
    assert_eq!(inv["thomas"]["values"].as_array().unwrap().len(), 8);
    assert_eq!(inv["weyl"]["values"].as_array().unwrap().len(), 16);
    assert!(inv["extra"]["t2hat"]["pair-scope"].is_object());
}

#[test]
fn path_command_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("curve.csv");
    let out = Command::new(env!("CARGO_BIN_EXE_agm"))
        .args(["path", "--scenario"])
        .arg(scenario("generated3.json"))
        .arg("--csv")
        .arg(&csv)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    assert_eq!(r["paths"][0]["status"], "pass");
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().next(), Some("t,x1,x2,x3,lambda1,lambda2,lambda3,defect"));
    assert_eq!(text.lines().count(), 514);
}

#[test]
fn two_dimensional_paths_are_vacuous() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(
        dir.path(),
        "s.json",
        r#"{"n": 2, "connection": {"1,1,1": "x2"}, "paths": [{"x0": [0, 0], "l0": [0.2, 0.1]}]}"#,
    );
    let out = agm(&["path"], &p);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    assert_eq!(r["paths"][0]["status"], "vacuous");
    assert!(r["summary"]["message"].as_str().unwrap().contains("vacuous"));
}

#[test]
fn leaving_the_chart_fails_with_the_exit_time() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(
        dir.path(),
        "s.json",
        r#"{"n": 3, "connection": {}, "grid": {"bounds": [[-1, 1], [-1, 1], [-1, 1]]},
            "paths": [{"x0": [0, 0, 0], "l0": [4, 0, 0], "steps": 64}]}"#,
    );
    let out = agm(&["path"], &p);
    assert_eq!(out.status.code(), Some(1));
    let err = report(&out)["paths"][0]["error"].as_str().unwrap().to_string();
    assert!(err.contains("t = 0.265625") && err.contains("x1"), "{err}");
}

#[test]
fn gen_output_reloads_and_audits_identically() {
    let dir = tempfile::tempdir().unwrap();
    let out = agm(&["gen"], &scenario("generated3.json"));
    assert_eq!(out.status.code(), Some(0));
    let explicit: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(explicit.get("generator").is_none());
    let p = write(dir.path(), "explicit.json", std::str::from_utf8(&out.stdout).unwrap());
    let a = report(&agm(&["audit"], &scenario("generated3.json")));
    let b = report(&agm(&["audit"], &p));
    assert_eq!(a["checks"].as_array().unwrap().len(), b["checks"].as_array().unwrap().len());
    assert_eq!(b["summary"]["status"], "pass");
}

#[test]
fn load_errors_name_the_field_and_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "bad.json", r#"{"n": 2, "connection": {"1,1,2": "x3", "2,1,1": "sin("}}"#);
    let out = agm(&["audit"], &p);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains(r#"connection["1,1,2"]"#) && err.contains(r#"connection["2,1,1"]"#), "{err}");
}

#[test]
fn bad_point_is_a_usage_error() {
    let out = agm(&["invariants", "--point=0.1"], &scenario("generated3.json"));
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unwritable_output_is_a_usage_error() {
    let out = Command::new(env!("CARGO_BIN_EXE_agm"))
        .args(["check", "--out", "/nonexistent-dir/report.json", "--scenario"])
        .arg(scenario("zero2.json"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}
