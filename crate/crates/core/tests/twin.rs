mod common;

use std::collections::BTreeSet;

use ptwin_core::twin::{
    read_snapshot, run_ablation, write_snapshot, Component, ProjectStore, RunOptions, SourceKind, Twin, TwinError,
};

fn quick() -> RunOptions {
    RunOptions {
        samples: Some(2000),
        ..RunOptions::default()
    }
}

#[test]
fn bad_evidence_row_is_rejected_whole() {
    let mut twin = common::loaded_twin();
    let before = twin.state().clone();
    let bad = "week,activity_id,percent_complete,elapsed_days,observation_sd\n\
               17,A030,0.5,10,\n\
               17,A040,1.3,4,\n";
    let err = twin.ingest(SourceKind::Evidence, bad).unwrap_err();
    match err {
        TwinError::SchemaViolation { row, column, .. } => {
            assert_eq!(row, 2);
            assert_eq!(column, "percent_complete");
        }
        e => panic!("{e}"),
    }
    assert_eq!(twin.state(), &before);
}

#[test]
fn unparseable_cell_names_its_column() {
    let mut twin = common::loaded_twin();
    let bad = "week,activity_id,percent_complete,elapsed_days,observation_sd\n17,A030,half,10,\n";
    match twin.ingest(SourceKind::Evidence, bad).unwrap_err() {
        TwinError::SchemaViolation { row, column, .. } => assert_eq!((row, column.as_str()), (1, "percent_complete")),
        e => panic!("{e}"),
    }
}

#[test]
fn empty_evidence_only_bumps_version() {
    let mut twin = common::loaded_twin();
    let before = twin.state().clone();
    let v = twin
        .ingest(SourceKind::Evidence, "week,activity_id,percent_complete,elapsed_days,observation_sd\n")
        .unwrap();
    assert_eq!(v, before.version + 1);
    let mut after = twin.state().clone();
    after.version = before.version;
    assert_eq!(after, before);
}

#[test]
fn week_without_evidence_flags_it() {
    let mut twin = common::loaded_twin();
    let w1 = twin.run_week(1, quick()).unwrap();
    assert!(w1.missing_evidence);
    assert_eq!(w1.updated_beliefs, 0);
}

#[test]
fn snapshot_round_trip_and_corruption() {
    let mut twin = common::loaded_twin();
    twin.run_week(1, quick()).unwrap();
    let text = write_snapshot(twin.state());
    assert_eq!(&read_snapshot(&text).unwrap(), twin.state());
    let truncated = &text[..text.len() - 10];
    assert!(matches!(read_snapshot(truncated), Err(TwinError::CorruptSnapshot(_))));
    assert!(matches!(read_snapshot("not a snapshot"), Err(TwinError::CorruptSnapshot(_))));
}

#[test]
fn stale_version_rejected() {
    let mut twin = common::loaded_twin();
    let v = twin.version();
    twin.run_week(1, quick()).unwrap();
    assert!(matches!(
        twin.check_version(v),
        Err(TwinError::StaleVersion { expected, current }) if expected == v && current == v + 1
    ));
    twin.check_version(v + 1).unwrap();
}

#[test]
fn rerunning_a_week_is_idempotent() {
    let mut twin = common::loaded_twin();
    let first = twin.run_week(1, quick()).unwrap();
    let v = twin.version();
    let again = twin.run_week(1, quick()).unwrap();
    assert_eq!(first, again);
    assert_eq!(twin.version(), v);
    assert!(matches!(
        twin.run_week(3, quick()),
        Err(TwinError::WeekOutOfOrder { expected: 2, got: 3 })
    ));
}

#[test]
fn decisions_are_recorded_once() {
    let mut twin = common::loaded_twin();
    let w = twin.run_week(1, quick()).unwrap();
    let id = w.recommendations[0].clone();
    let rec = twin.decide(&id, false, "Supervisor preference", "2025-01-15T16:00:00Z").unwrap();
    assert_eq!(rec.status, "rejected");
    assert_eq!(rec.reason, "Supervisor preference");
    assert!(twin.decide(&id, true, "", "2025-01-15T17:00:00Z").is_err());
    assert!(matches!(
        twin.decide("RL-999", true, "", "t"),
        Err(TwinError::UnknownRecommendation(_))
    ));
    assert_eq!(twin.state().decision_log.len(), 1);
}

#[test]
fn replay_rebuilds_identical_state() {
    let mut twin = common::loaded_twin();
    for w in 1..=3 {
        twin.run_week(w, quick()).unwrap();
    }
    let rebuilt = Twin::replay(twin.initial().clone(), twin.events()).unwrap();
    assert_eq!(write_snapshot(rebuilt.state()), write_snapshot(twin.state()));
}

#[test]
fn store_saves_and_loads() {
    let dir = tempfile::tempdir().unwrap();
    let store = ProjectStore::new(dir.path().join("p"));
    let mut twin = store.init(common::config()).unwrap();
    twin.ingest(SourceKind::Network, &common::fixture("network.json")).unwrap();
    twin.ingest(SourceKind::Priors, &common::fixture("priors.csv")).unwrap();
    store.save(&twin).unwrap();
    let mut loaded = store.load().unwrap();
    assert_eq!(loaded, twin);
    loaded.run_week(1, quick()).unwrap();
    store.save(&loaded).unwrap();
    let again = store.load().unwrap();
    assert_eq!(again.events().len(), 3);
    assert_eq!(again.state(), loaded.state());
}

#[test]
fn scenario_evaluation_leaves_twin_untouched() {
    let twin = common::loaded_twin();
    let before = write_snapshot(twin.state());
    let results = twin.state().scenario_results(quick()).unwrap();
    assert_eq!(results.len(), 7);
    assert_eq!(write_snapshot(twin.state()), before);
}

#[test]
fn ablation_null_behaviours() {
    let mut twin = common::loaded_twin();
    common::replay(&mut twin, quick());
    let full = run_ablation(&twin, &BTreeSet::new()).unwrap();
    assert_eq!(full.p50_series, twin.state().p50_series());

    let bayes = run_ablation(&twin, &BTreeSet::from([Component::Bayes])).unwrap();
    assert!(bayes.p50_series.windows(2).all(|w| w[0] == w[1]), "{:?}", bayes.p50_series);

    let drl = run_ablation(&twin, &BTreeSet::from([Component::Drl])).unwrap();
    assert_eq!(drl.overtime_hours, drl.baseline_overtime_hours);
    assert_eq!(drl.baseline_overtime_hours, full.baseline_overtime_hours);
    assert!(full.overtime_hours < full.baseline_overtime_hours);

    let nlp = run_ablation(&twin, &BTreeSet::from([Component::Nlp])).unwrap();
    assert_eq!(nlp.labor_reduction_pct, Some(0.0));
    assert_eq!(nlp.cost_mape_pct, Some(100.0));

    let cv = run_ablation(&twin, &BTreeSet::from([Component::Cv])).unwrap();
    assert_eq!(cv.final_spi, Some(1.0));

    assert!(matches!("vision".parse::<Component>(), Err(TwinError::UnknownComponent(_))));
}

#[test]
fn hypotheses_need_a_full_replay() {
    let mut twin = common::loaded_twin();
    twin.run_week(1, quick()).unwrap();
    assert!(matches!(twin.state().hypotheses(), Err(TwinError::IncompleteReplay(16))));
}
