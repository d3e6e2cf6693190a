//! Run-directory behavior: input validation, manifest round-trips, and
//! reload of persisted runs.

mod common;

use std::sync::Arc;

use common::*;
use reporteval_core::benchmark::{evaluate_system, load_run, BenchmarkError, EvalOptions};
use reporteval_core::corpus::QueryRecord;
use reporteval_core::judge::{Judge, JudgeOptions, MockBackend, TemplateSet};
use reporteval_core::sources::{FetchPolicy, SourceCache, SourceStore};

fn judge_for(script: Vec<(String, String)>) -> Judge {
    Judge::new(
        Arc::new(MockBackend::from_pairs(script)),
        JudgeOptions::immediate(),
    )
}

#[test]
fn report_without_matching_query_names_the_id() {
    let dir = tempfile::tempdir().unwrap();
    let reports_dir = dir.path().join("reports");
    std::fs::create_dir_all(&reports_dir).unwrap();
    std::fs::write(
        reports_dir.join("q-999.md"),
        "An orphan report with no query.",
    )
    .unwrap();

    let queries: Vec<QueryRecord> = vec![query_for("q-001")];
    let store = SourceStore::new(
        SourceCache::open(dir.path().join("cache")).unwrap(),
        FetchPolicy::offline(),
    );
    let err = evaluate_system(
        "sys",
        "r1",
        &dir.path().join("run"),
        &reports_dir,
        &queries,
        &judge_for(Vec::new()),
        &TemplateSet::default(),
        &store,
        &EvalOptions::default(),
    )
    .unwrap_err();
    match err {
        BenchmarkError::ReportWithoutQuery(id) => assert_eq!(id, "q-999"),
        other => panic!("expected ReportWithoutQuery, got {other}"),
    }
}

#[test]
fn persisted_run_reloads_identically() {
    let dir = tempfile::tempdir().unwrap();
    let base = dir.path();

    let fixtures: Vec<ReportFixture> = (1..=3)
        .map(|i| {
            let mut fixture = ReportFixture::new(&format!("q-{i:02}"));
            fixture.quality.4 = i as u8;
            fixture
        })
        .collect();
    let queries: Vec<QueryRecord> = fixtures.iter().map(|f| query_for(&f.id)).collect();
    let templates = TemplateSet::default();
    let options = EvalOptions::default();

    let reports_dir = base.join("reports");
    write_reports(&reports_dir, "sys", &fixtures);
    let cache = SourceCache::open(base.join("cache")).unwrap();
    let mut script = Vec::new();
    for fixture in &fixtures {
        seed_sources(&cache, "sys", fixture);
    }
    for (fixture, query) in fixtures.iter().zip(&queries) {
        script.extend(script_report(
            "sys", fixture, query, &templates, &options, &cache,
        ));
    }
    let store = SourceStore::new(cache, FetchPolicy::offline());

    let run_dir = base.join("run");
    let evaluated = evaluate_system(
        "sys",
        "r1",
        &run_dir,
        &reports_dir,
        &queries,
        &judge_for(script),
        &templates,
        &store,
        &options,
    )
    .unwrap();

    let reloaded = load_run(&run_dir).unwrap();
    assert_eq!(evaluated, reloaded);
    assert_eq!(reloaded.manifest.system, "sys");
    assert_eq!(reloaded.manifest.pair_cap, 30);
    assert_eq!(reloaded.reports.len(), 3);
    assert!(reloaded
        .manifest
        .template_versions
        .values()
        .all(|v| v == "default-v1"));
}
