mod common;

use std::fs;

use autopatch_core::pipeline::{Outcome, PatchStep};
use autopatch_core::provider::Purpose;
use autopatch_core::EXIT_PROVIDER;

#[test]
fn zram_variant_is_patched_in_one_loop() {
    let (run, gw) = common::replay_run("patched-clean", "zram_variant", 10);
    assert_eq!(run.outcome, Outcome::PatchedClean, "{:?}", run.error);
    assert_eq!(run.loop_count, 1);
    assert_eq!(run.matched.as_ref().unwrap().candidate_cve_id, "CVE-2025-21671");
    let l = gw.ledger();
    assert_eq!(l.count(Purpose::Summarize), 1);
    assert_eq!(l.count(Purpose::DescribeVariables), 1);
    assert_eq!(l.count(Purpose::DescribeFunctions), 1);
    assert_eq!(l.count(Purpose::Verify), 2);
    assert_eq!(l.count(Purpose::Patch), 1);
    assert!(run.final_code.contains("dev->table = NULL;"));
    let m = run.mapping.as_ref().unwrap();
    assert_eq!(m.variables["variable_1"], "dev");
    assert_eq!(m.functions["function_2"], "vfree");
}

#[test]
fn replayed_run_matches_recorded_record() {
    let (run, _) = common::replay_run("patched-clean", "zram_variant", 10);
    let recorded = fs::read_to_string(common::fixtures().join("runs/patched-clean.json")).unwrap();
    assert_eq!(run.to_json(), recorded);
}

#[test]
fn cap_stops_after_three_loops() {
    let (run, gw) = common::replay_run("cap", "zram_variant", 3);
    assert_eq!(run.outcome, Outcome::IterationCapReached);
    assert_eq!(run.loop_count, 3);
    assert_eq!(run.patches.len(), 3);
    assert_eq!(run.verdicts.len(), 4);
    assert!(run.verdicts.iter().all(|v| v.result));
    // The first patch reply had no JSON block and was re-prompted once.
    assert_eq!(gw.ledger().count(Purpose::Patch), 4);
    match &run.patches[0] {
        PatchStep::Patched(p) => assert_eq!(p.attempts, 2),
        other => panic!("{other:?}"),
    }
}

#[test]
fn unrelated_target_is_clean_without_agents() {
    let (run, gw) = common::replay_run("no-match", "checksum", 10);
    assert_eq!(run.outcome, Outcome::CleanNoMatch);
    assert!(run.matched.is_none());
    assert_eq!(gw.ledger().count(Purpose::Verify), 0);
    assert_eq!(gw.ledger().count(Purpose::Patch), 0);
    assert_eq!(run.final_code, run.target.code);
}

#[test]
fn unrecorded_request_fails_offline() {
    let (run, _) = common::replay_run("no-match", "zram_variant", 10);
    assert_eq!(run.outcome, Outcome::Error);
    assert_eq!(run.error.unwrap().exit_code, EXIT_PROVIDER);
}
