//! Smoke tests: every bundled scenario configuration validates cleanly,
//! runs to completion, and ends in the state its script aims for.

use chainless_core::scenario::validate::{has_errors, validate_config};
use chainless_core::scenario::{run_scenario, ScenarioConfig, ScenarioRun};
use std::fs;
use std::path::PathBuf;

fn fixture(name: &str) -> ScenarioConfig {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name);
    let text = fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    serde_json::from_str(&text).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn run(name: &str) -> ScenarioRun {
    let config = fixture(name);
    let findings = validate_config(&config);
    assert!(!has_errors(&findings), "{name}: {findings:?}");
    run_scenario(&config).unwrap_or_else(|e| panic!("{name}: {e}"))
}

#[test]
fn event_emitter_delivers_each_count_change() {
    let run = run("s1_event_emitter.json");
    let report = run.report();
    assert_eq!(report["deliveries"], 5, "{report:#}");
    assert_eq!(report["dead_letters"], 0);
}

#[test]
fn event_emitter_survives_reorgs_without_duplicates() {
    let run = run("s1_reorg.json");
    let report = run.report();
    assert!(report["reorgs"].as_u64().unwrap() >= 1, "{report:#}");
    assert_eq!(report["deliveries"], 8, "{report:#}");
}

#[test]
fn contract_as_function_hits_the_frozen_cost_split() {
    let run = run("s2_contract_function.json");
    let report = run.report();
    assert_eq!(report["fees_charged"], 1515, "{report:#}");
    assert_eq!(report["billed_units"], 100, "{report:#}");
    assert_eq!(report["durable_calls"], 100, "{report:#}");
    assert_eq!(report["dropped_transactions"], 0, "{report:#}");
}

#[test]
fn offchain_orchestration_completes_both_instances() {
    let run = run("s3a_orchestration.json");
    let statuses = run.instance_statuses();
    assert_eq!(statuses.get("lin-1").map(String::as_str), Some("completed"), "{statuses:?}");
    assert_eq!(statuses.get("wait-1").map(String::as_str), Some("completed"), "{statuses:?}");
}

#[test]
fn onchain_engine_completes_the_instance() {
    let run = run("s3b_onchain_engine.json");
    let statuses = run.instance_statuses();
    assert_eq!(statuses.get("lin-1").map(String::as_str), Some("completed"), "{statuses:?}");
}

#[test]
fn message_bus_routes_every_publication() {
    let run = run("s4_message_bus.json");
    let report = run.report();
    assert_eq!(report["bus_deliveries"], 6, "{report:#}");
    assert_eq!(report["dead_letters"], 0, "{report:#}");
}

#[test]
fn process_manager_hands_work_across_platforms() {
    let run = run("s4_process_manager.json");
    let statuses = run.instance_statuses();
    assert_eq!(
        statuses.get("cross-1").map(String::as_str),
        Some("completed"),
        "{statuses:?}"
    );
}
