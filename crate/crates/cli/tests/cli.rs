//! End-to-end checks of the `chainless` binary: exit codes, output
//! formats, and the trace file contract.

use std::path::PathBuf;
use std::process::{Command, Output};

fn chainless(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_chainless"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn fixture(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

#[test]
fn run_prints_a_report_and_writes_a_trace() {
    let dir = tempfile::tempdir().unwrap();
    let trace_path = dir.path().join("trace.jsonl");
    let out = chainless(&[
        "run",
        &fixture("s1_event_emitter.json"),
        "--trace",
        trace_path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["id"], "s1_event_emitter");
    assert_eq!(report["deliveries"], 5);

    let trace = std::fs::read_to_string(&trace_path).unwrap();
    assert!(!trace.is_empty());
    for line in trace.lines() {
        let entry: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(entry["tick"].is_u64(), "malformed trace line: {line}");
    }
}

#[test]
fn identical_runs_write_identical_traces() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.jsonl");
    let b = dir.path().join("b.jsonl");
    for path in [&a, &b] {
        let out = chainless(&[
            "run",
            &fixture("s1_reorg.json"),
            "--trace",
            path.to_str().unwrap(),
        ]);
        assert!(out.status.success());
    }
    assert_eq!(
        std::fs::read(&a).unwrap(),
        std::fs::read(&b).unwrap(),
        "same config and seed must reproduce the trace byte for byte"
    );
}

#[test]
fn validate_passes_clean_configs() {
    let out = chainless(&["validate", &fixture("s2_contract_function.json")]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("A-1"), "{text}");
    assert!(text.contains("0 error(s)"), "{text}");
}

#[test]
fn validate_rejects_dangling_references_with_nonzero_exit() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("broken.json");
    std::fs::write(
        &path,
        serde_json::json!({
            "id": "broken",
            "kind": "S1_EventEmitter",
            "ticks": 5,
            "accounts": [{"name": "alice", "fund": 1000}],
            "contracts": [{"name": "counter", "template": "counter", "deployer": "ghost"}],
            "subscriptions": [{"event": "CountChanged", "target": "queue"}],
            "actions": [{"at": 1, "action": {"type": "call", "sender": "alice",
                         "contract": "counter", "function": "inc", "max_fee": 10}}]
        })
        .to_string(),
    )
    .unwrap();
    let out = chainless(&["validate", path.to_str().unwrap()]);
    assert!(!out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("ghost"), "{text}");
}

#[test]
fn validate_json_emits_machine_readable_findings() {
    let out = chainless(&["validate", &fixture("s4_message_bus.json"), "--json"]);
    assert!(out.status.success());
    let findings: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(findings.as_array().is_some_and(|a| !a.is_empty()));
}

#[test]
fn matrix_renders_all_rows_and_serializes() {
    let out = chainless(&["matrix"]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    for id in ["A-1", "A-4", "B-3", "B-4", "C-2"] {
        assert!(text.contains(id), "matrix table misses {id}:\n{text}");
    }

    let out = chainless(&["matrix", "--json"]);
    assert!(out.status.success());
    let matrix: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(matrix["requirements"].as_array().unwrap().len(), 10);
    assert_eq!(matrix["scenarios"].as_array().unwrap().len(), 6);
}

#[test]
fn matrix_filters_by_scenario_kind() {
    let out = chainless(&["matrix", "--scenario", "S1_EventEmitter"]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("B-1"), "{text}");
    assert!(!text.contains("B-2"), "event emitting needs no invocation support:\n{text}");
}

#[test]
fn cost_reports_the_reference_ratio() {
    let out = chainless(&["cost", &fixture("s2_contract_function.json")]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["fee_units"], 1515);
    assert_eq!(report["billed_units"], 100);
    let ratio = report["ratio_chain_to_faas"].as_f64().unwrap();
    assert!((ratio - 1515.0).abs() < 1e-9, "ratio {ratio}");
}
