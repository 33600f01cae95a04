mod common;

use axum::body::Body;
use axum::http::{header, Request, StatusCode};
use biaslens::api::router;
use biaslens::{pipeline, Stage, Store};
use common::demo_copy;
use http_body_util::BodyExt;
use serde_json::Value;
use tower::ServiceExt;

async fn get(store: &Store, uri: &str, etag: Option<&str>) -> (StatusCode, Option<String>, Value) {
    let mut req = Request::builder().uri(uri);
    if let Some(tag) = etag {
        req = req.header(header::IF_NONE_MATCH, tag);
    }
    let resp = router(store.clone()).oneshot(req.body(Body::empty()).unwrap()).await.unwrap();
    let status = resp.status();
    let tag = resp
        .headers()
        .get(header::ETAG)
        .map(|v| v.to_str().unwrap().to_string());
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let body = if bytes.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&bytes).unwrap()
    };
    (status, tag, body)
}

fn stored(store: &Store, stage: Stage, rel: &str) -> Value {
    let m = store.manifest().unwrap();
    store.read_json(&m.stages[&stage], rel).unwrap()
}

#[tokio::test]
async fn responses_are_the_stored_files() {
    let (_tmp, store) = demo_copy();
    for mode in ["title", "body", "entity"] {
        let (s, _, body) = get(&store, &format!("/api/topics/0/spectrum?mode={mode}"), None).await;
        assert_eq!(s, StatusCode::OK);
        assert_eq!(body, stored(&store, Stage::Metrics, &format!("spectrum/0/{mode}.json")));
    }
    let (_, _, map) = get(&store, "/api/topics/1/map", None).await;
    assert_eq!(map, stored(&store, Stage::Metrics, "map/1.json"));
    let (_, _, ents) = get(&store, "/api/topics/2/entities", None).await;
    assert_eq!(ents, stored(&store, Stage::Metrics, "entities/2.json"));
    let (_, _, tree) = get(&store, "/api/topics", None).await;
    assert_eq!(tree, stored(&store, Stage::Topics, "topic_tree.json"));
    let (_, _, graph) = get(&store, "/api/topics/0/ontology", None).await;
    assert_eq!(graph, stored(&store, Stage::Audit, "ontology/0.json"));
}

#[tokio::test]
async fn spectrum_defaults_to_title_and_filters_entities() {
    let (_tmp, store) = demo_copy();
    let (_, _, def) = get(&store, "/api/topics/0/spectrum", None).await;
    assert_eq!(def, stored(&store, Stage::Metrics, "spectrum/0/title.json"));
    let (s, _, one) = get(&store, "/api/topics/0/spectrum?mode=entity&entity=Helena%20Varga/PER", None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(one["subject"]["value"]["surface"], "Helena Varga");
    let (s, _, _) = get(&store, "/api/topics/0/spectrum?mode=entity&entity=Nobody/PER", None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn error_statuses() {
    let (_tmp, store) = demo_copy();
    for uri in ["/api/topics/99", "/api/topics/abc", "/api/topics/99/spectrum", "/api/nothing", "/api/topics/0/ontology?article=zzz"] {
        let (s, tag, body) = get(&store, uri, None).await;
        assert_eq!(s, StatusCode::NOT_FOUND, "{uri}");
        assert!(tag.is_none());
        assert!(body["error"].is_string());
    }
    for uri in ["/api/topics/0/spectrum?mode=mood", "/api/cross-topic?mode=entity", "/api/topics/0/spectrum?mode=title&entity=A/PER"] {
        let (s, _, _) = get(&store, uri, None).await;
        assert_eq!(s, StatusCode::BAD_REQUEST, "{uri}");
    }
}

#[tokio::test]
async fn stale_stage_is_a_conflict_with_the_rebuild_command() {
    let (_tmp, store) = demo_copy();
    pipeline::config_set(&store, "metrics.mean_set", "include_zero").unwrap();
    let (s, _, body) = get(&store, "/api/topics/0/spectrum", None).await;
    assert_eq!(s, StatusCode::CONFLICT);
    assert_eq!(body["rebuild"], "biaslens metrics");
    // Stages that do not read the changed key keep serving.
    let (s, _, _) = get(&store, "/api/topics/0/ontology", None).await;
    assert_eq!(s, StatusCode::OK);
}

#[tokio::test]
async fn etag_follows_the_stage_hash() {
    let (_tmp, store) = demo_copy();
    let (_, tag, _) = get(&store, "/api/topics/0/map", None).await;
    let tag = tag.unwrap();
    let (s, again, body) = get(&store, "/api/topics/0/map", Some(&tag)).await;
    assert_eq!(s, StatusCode::NOT_MODIFIED);
    assert_eq!(again.as_deref(), Some(tag.as_str()));
    assert_eq!(body, Value::Null);

    pipeline::config_set(&store, "metrics.mean_set", "include_zero").unwrap();
    pipeline::metrics(&store).unwrap();
    let (s, new_tag, _) = get(&store, "/api/topics/0/map", Some(&tag)).await;
    assert_eq!(s, StatusCode::OK);
    assert_ne!(new_tag.unwrap(), tag);
}

#[tokio::test]
async fn newspapers_carry_article_counts() {
    let (_tmp, store) = demo_copy();
    let (_, _, body) = get(&store, "/api/newspapers", None).await;
    let rows = body.as_array().unwrap();
    assert_eq!(rows.len(), 6);
    let total: u64 = rows.iter().map(|r| r["article_count"].as_u64().unwrap()).sum();
    assert_eq!(total, 61);
}

#[tokio::test]
async fn domain_filter_keeps_only_that_newspaper() {
    let (_tmp, store) = demo_copy();
    let (_, _, full) = get(&store, "/api/topics/0/ontology", None).await;
    let (s, _, dom) = get(&store, "/api/topics/0/ontology?newspaper=globe", None).await;
    assert_eq!(s, StatusCode::OK);
    let edges = dom["edges"].as_array().unwrap();
    assert!(!edges.is_empty());
    assert!(edges.len() < full["edges"].as_array().unwrap().len());
    assert!(edges.iter().all(|e| e["newspaper_id"] == "globe"));
}
