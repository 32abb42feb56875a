//! Binary-level contract: exit codes, report files, and the routed-file
//! verbs, exercised by spawning the real executable.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use qcontrol::channel::KrausChannel;
use qcontrol::cli::SuiteReport;

fn qcontrol(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qcontrol"))
        .args(args)
        .output()
        .expect("binary should spawn")
}

fn fixtures_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

fn temp_dir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join("qcontrol_cli_tests").join(name);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn passing_suite_exits_zero_and_prints_a_summary() {
    let out = qcontrol(&["ctrl-unitary", "--dims", "2", "--trials", "3"]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("pass  ctrl of embedded unitary d=2"));
    assert!(stdout.contains("ctrl-unitary: 2/2 cases passed"));
}

#[test]
fn unattainable_tolerance_fails_with_exit_code_one() {
    let out = qcontrol(&["ctrl-unitary", "--dims", "2", "--trials", "2", "--tol", "1e-30"]);
    assert_eq!(out.status.code(), Some(1));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("FAIL"));
}

#[test]
fn bad_configuration_exits_two() {
    let out = qcontrol(&["ctrl-unitary", "--dims", "0"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("invalid suite config"));

    let out = qcontrol(&["no-such-verb"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn report_files_round_trip_and_repeat_identically_modulo_runtime() {
    let dir = temp_dir("reports");
    let path = dir.join("report.json");
    let mut texts = Vec::new();
    for _ in 0..2 {
        let out = qcontrol(&[
            "roundtrip",
            "--dims",
            "2",
            "--trials",
            "2",
            "--seed",
            "3",
            "--json",
            path.to_str().unwrap(),
        ]);
        assert!(out.status.success());
        texts.push(std::fs::read_to_string(&path).unwrap());
    }
    let report: SuiteReport = serde_json::from_str(&texts[0]).unwrap();
    assert_eq!(report.config.seed, 3);
    assert_eq!(report.failures, 0);
    assert_eq!(report.passes, report.cases.len());

    let mut va: serde_json::Value = serde_json::from_str(&texts[0]).unwrap();
    let mut vb: serde_json::Value = serde_json::from_str(&texts[1]).unwrap();
    va["runtime_ms"] = 0.into();
    vb["runtime_ms"] = 0.into();
    assert_eq!(va, vb);
}

#[test]
fn routed_check_reports_the_shipped_circuit_clean() {
    let file = fixtures_dir().join("fig6_two_ctrl.rqc");
    let out = qcontrol(&["routed-check", file.to_str().unwrap()]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(report["violations"].as_array().unwrap().is_empty());
    assert_eq!(report["nodes"].as_array().unwrap().len(), 4);
}

#[test]
fn routed_check_flags_a_leaking_route_with_exit_code_one() {
    let dir = temp_dir("leaky");
    let text = std::fs::read_to_string(fixtures_dir().join("fig6_two_ctrl.rqc")).unwrap();
    let broken = text.replace("route [[1, 1, 0, 1], [1, 0, 1, 1]]", "route [[0, 1, 0, 1], [1, 0, 1, 1]]");
    assert_ne!(broken, text);
    std::fs::write(dir.join("fig6_two_ctrl.rqc"), broken).unwrap();
    for payload in ["fig6_expand.json", "fig6_contract.json"] {
        std::fs::copy(fixtures_dir().join(payload), dir.join(payload)).unwrap();
    }
    let out = qcontrol(&["routed-check", dir.join("fig6_two_ctrl.rqc").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(!report["violations"].as_array().unwrap().is_empty());
}

#[test]
fn routed_eval_emits_the_evaluated_channel() {
    let dir = fixtures_dir();
    let file = dir.join("fig6_two_ctrl.rqc");
    let bind_a = format!("A={}", dir.join("fig6_slot_a.json").display());
    let bind_b = format!("B={}", dir.join("fig6_slot_b.json").display());
    let out = qcontrol(&["routed-eval", file.to_str().unwrap(), "--bind", &bind_a, "--bind", &bind_b]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let channel: KrausChannel = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!((channel.dim_in(), channel.dim_out()), (4, 4));
}

#[test]
fn routed_eval_without_bindings_exits_two() {
    let file = fixtures_dir().join("fig6_two_ctrl.rqc");
    let out = qcontrol(&["routed-eval", file.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unbound slot"));
}
