mod common;

use std::collections::{BTreeMap, BTreeSet};

use biaslens::pipeline;
use biaslens::{ErrorKind, Stage, StageStatus};
use common::demo_copy;
use proptest::prelude::*;

/// Stages whose output depends on each key, stated independently of the store tables.
fn readers(key: &str) -> Vec<&'static str> {
    match key {
        "language.keep" => vec!["clean"],
        k if k.starts_with("clustering.") => vec!["clusters"],
        "quality.noise" => vec!["clusters"],
        "quality.dominance" => vec!["clusters", "topics"],
        k if k.starts_with("topics.") => vec!["topics"],
        k if k.starts_with("scores.") => vec!["metrics"],
        "entities.k" => vec!["contexts", "metrics"],
        "entities.context_mode" => vec!["contexts"],
        "metrics.mean_set" => vec!["metrics"],
        "ontology.model" | "ontology.temperature" | "ontology.max_retries" => vec!["ontologies"],
        // Operational limits: they change how a run proceeds, not what a finished stage holds.
        "ontology.transport_retries" | "ontology.max_requests" | "ontology.parallelism" => vec![],
        other => panic!("unexpected config key {other}"),
    }
}

/// Direct consumers of each stage (required or optional edges).
fn consumers(stage: &str) -> Vec<&'static str> {
    match stage {
        "corpus" => vec!["embeddings", "clean"],
        "embeddings" => vec!["clusters"],
        "clean" => vec!["clusters", "topics", "scores", "entities", "ontologies", "contexts", "audit", "metrics"],
        "clusters" => vec!["topics"],
        "topics" => vec!["contexts", "audit", "metrics"],
        "scores" => vec!["metrics"],
        "entities" => vec!["contexts", "entity_sentiment", "metrics"],
        "contexts" => vec!["entity_sentiment"],
        "entity_sentiment" => vec!["metrics"],
        "ontologies" => vec!["audit"],
        "audit" | "metrics" => vec![],
        other => panic!("unexpected stage {other}"),
    }
}

fn closure(start: &[&'static str]) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    let mut todo: Vec<&str> = start.to_vec();
    while let Some(s) = todo.pop() {
        if out.insert(s.to_string()) {
            todo.extend(consumers(s));
        }
    }
    out
}

/// A valid value different from the demo's for every key.
fn changed_value(key: &str) -> &'static str {
    match key {
        "language.keep" => "de",
        "clustering.reduce_dim" => "5",
        "clustering.min_cluster_size" => "6",
        "clustering.min_samples" => "3",
        "clustering.allow_single_cluster" => "true",
        "quality.noise" => "0.5",
        "quality.dominance" => "0.5",
        "topics.top_n_terms" => "12",
        "topics.name_terms" => "3",
        "topics.merge_single_source" => "false",
        "scores.title_model" => "title-model",
        "scores.body_model" => "body-model",
        "scores.entity_model" => "entity-model",
        "entities.k" => "3",
        "entities.context_mode" => r#"{"mode": "window", "chars": 80}"#,
        "metrics.mean_set" => "include_zero",
        "ontology.model" => "other-model",
        "ontology.temperature" => "0.7",
        "ontology.max_retries" => "4",
        "ontology.transport_retries" => "5",
        "ontology.max_requests" => "100",
        "ontology.parallelism" => "2",
        other => panic!("unexpected config key {other}"),
    }
}

fn stale_names(store: &biaslens::Store) -> BTreeSet<String> {
    let m = store.manifest().unwrap();
    m.stale_stages().into_iter().map(|s| s.name().to_string()).collect()
}

#[test]
fn demo_builds_every_stage_fresh() {
    let (_tmp, store) = demo_copy();
    let m = store.manifest().unwrap();
    for stage in Stage::ALL {
        assert_eq!(m.status(stage), StageStatus::Fresh, "{stage}");
    }
}

#[test]
fn every_config_key_invalidates_its_readers_and_their_dependents() {
    let (_tmp, store) = demo_copy();
    let keys = store.manifest().unwrap().config.keys();
    assert_eq!(keys.len(), 22);
    for key in keys {
        let before = store.manifest().unwrap();
        let original = before.config.get(&key).unwrap();
        let out = pipeline::config_set(&store, &key, changed_value(&key)).unwrap();
        let expected = closure(&readers(&key));
        assert_eq!(stale_names(&store), expected, "key {key}");
        let reported: BTreeSet<String> = out.summary["invalidated"]
            .as_array()
            .unwrap()
            .iter()
            .map(|v| v.as_str().unwrap().to_string())
            .collect();
        assert_eq!(reported, expected, "reported for {key}");
        // Putting the value back makes every stage fresh again without a rebuild.
        pipeline::config_set(&store, &key, &original.to_string()).unwrap();
        assert!(stale_names(&store).is_empty(), "revert {key}");
        assert_eq!(store.manifest().unwrap(), before);
    }
}

#[test]
fn stale_error_names_the_full_rebuild_plan() {
    let (_tmp, store) = demo_copy();
    pipeline::config_set(&store, "topics.top_n_terms", "12").unwrap();
    let err = pipeline::metrics(&store).unwrap_err();
    assert_eq!(err.kind, ErrorKind::Stale);
    assert_eq!(err.exit_code(), 2);
    let plan = err.rebuild.unwrap();
    let steps: Vec<&str> = plan.split(" && ").collect();
    assert_eq!(
        steps,
        ["biaslens topics", "biaslens contexts-export", "biaslens entities-load --baseline-sentiment", "biaslens metrics"]
    );
}

#[test]
fn rebuilding_unchanged_inputs_reuses_the_version() {
    let (_tmp, store) = demo_copy();
    let before = store.manifest().unwrap();
    pipeline::topics(&store).unwrap();
    pipeline::metrics(&store).unwrap();
    assert_eq!(store.manifest().unwrap(), before);
}

#[test]
fn new_version_keeps_the_previous_one_readable() {
    let (_tmp, store) = demo_copy();
    let old = store.manifest().unwrap().stages[&Stage::Topics].clone();
    let old_bytes = store.read_bytes(&old, "topics.json").unwrap();
    pipeline::config_set(&store, "topics.top_n_terms", "12").unwrap();
    pipeline::topics(&store).unwrap();
    let new = store.manifest().unwrap().stages[&Stage::Topics].clone();
    assert_ne!(new.hash, old.hash);
    assert_ne!(new.dir, old.dir);
    assert_eq!(store.read_bytes(&old, "topics.json").unwrap(), old_bytes);
    // Rebuilding downstream settles the chain again.
    pipeline::contexts_export(&store, None).unwrap();
    pipeline::entities_load(
        &store,
        &pipeline::EntitiesArgs {
            baseline_sentiment: true,
            ..Default::default()
        },
    )
    .unwrap();
    pipeline::metrics(&store).unwrap();
    pipeline::ontology_audit(&store, Some(&biaslens::demo::demo_dir().join("aliases.json"))).unwrap();
    assert!(stale_names(&store).is_empty());
}

#[test]
fn tampered_artifact_is_rejected() {
    let (_tmp, store) = demo_copy();
    let rec = store.manifest().unwrap().stages[&Stage::Topics].clone();
    let path = store.stage_dir(&rec).join("topics.json");
    let mut bytes = std::fs::read(&path).unwrap();
    bytes.push(b' ');
    std::fs::write(&path, bytes).unwrap();
    assert!(store.read_bytes(&rec, "topics.json").is_err());
}

#[test]
fn missing_upstream_exits_with_code_two() {
    let tmp = tempfile::TempDir::new().unwrap();
    let root = tmp.path().join("p");
    pipeline::init(&root, "empty", &[], false).unwrap();
    let store = biaslens::Store::open(&root).unwrap();
    let err = pipeline::topics(&store).unwrap_err();
    assert_eq!(err.kind, ErrorKind::Missing);
    assert_eq!(err.exit_code(), 2);
    assert!(err.rebuild.unwrap().contains("biaslens ingest"));
}

#[test]
fn invalid_config_values_are_validation_errors() {
    let (_tmp, store) = demo_copy();
    for (k, v) in [
        ("clustering.min_cluster_size", "1"),
        ("quality.noise", "1.5"),
        ("no.such_key", "1"),
        ("metrics.mean_set", "everyone"),
    ] {
        let err = pipeline::config_set(&store, k, v).unwrap_err();
        assert_eq!(err.exit_code(), 1, "{k}={v}");
    }
    assert!(stale_names(&store).is_empty());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn combined_changes_invalidate_the_union(mask in proptest::collection::vec(any::<bool>(), 22)) {
        let (_tmp, store) = demo_copy();
        let keys = store.manifest().unwrap().config.keys();
        let mut starts = Vec::new();
        for (key, on) in keys.iter().zip(&mask) {
            if *on {
                pipeline::config_set(&store, key, changed_value(key)).unwrap();
                starts.extend(readers(key));
            }
        }
        prop_assert_eq!(stale_names(&store), closure(&starts));
        let hashes: BTreeMap<Stage, String> = store.manifest().unwrap().stages.iter().map(|(s, r)| (*s, r.hash.clone())).collect();
        prop_assert_eq!(hashes.len(), Stage::ALL.len());
    }
}
