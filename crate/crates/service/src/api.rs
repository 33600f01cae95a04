//! Read-only HTTP API over the project store.
//!
//! Every response is a projection of stored stage files; nothing is
//! recomputed except the newspaper/article filter on ontology graphs, which
//! reuses the same function as `biaslens export`. ETags are derived from the
//! hashes of the stages a response reads.

use std::net::SocketAddr;
use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::Router;
use biaslens_core::corpus::CorpusStats;
use biaslens_core::digest::sha256_parts;
use biaslens_core::entities::EntityKey;
use biaslens_core::ontology::{filter_graph, GraphFilter, OntologyGraph};
use biaslens_core::topics::TopicRecord;
use biaslens_core::Corpus;
use serde::Deserialize;
use serde_json::{json, Value};

use crate::error::{CliError, ErrorKind};
use crate::store::{Manifest, Stage, StageRecord, Store};

#[derive(Debug, Clone, PartialEq)]
pub enum ApiError {
    NotFound(String),
    BadRequest(String),
    /// Missing or stale stage.
    Conflict { message: String, rebuild: Option<String> },
    Internal(String),
}

impl ApiError {
    pub fn status(&self) -> StatusCode {
        match self {
            ApiError::NotFound(_) => StatusCode::NOT_FOUND,
            ApiError::BadRequest(_) => StatusCode::BAD_REQUEST,
            ApiError::Conflict { .. } => StatusCode::CONFLICT,
            ApiError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }

    fn from_cli(e: CliError) -> Self {
        match e.kind {
            ErrorKind::Missing | ErrorKind::Stale => ApiError::Conflict {
                message: e.message,
                rebuild: e.rebuild,
            },
            _ => ApiError::Internal(e.message),
        }
    }

    pub fn into_cli(self) -> CliError {
        match self {
            ApiError::NotFound(m) | ApiError::BadRequest(m) | ApiError::Internal(m) => CliError::validation(m),
            ApiError::Conflict { message, rebuild } => CliError::stale(message, rebuild.unwrap_or_default()),
        }
    }

    fn body(&self) -> Value {
        match self {
            ApiError::Conflict { message, rebuild } => json!({ "error": message, "rebuild": rebuild }),
            ApiError::NotFound(m) | ApiError::BadRequest(m) | ApiError::Internal(m) => json!({ "error": m }),
        }
    }
}

type ApiResult<T> = Result<T, ApiError>;

/// A response body with the ETag of the snapshot it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub etag: String,
    pub body: Value,
}

fn fresh(m: &Manifest, stage: Stage) -> ApiResult<&StageRecord> {
    m.require(stage).map_err(ApiError::from_cli)
}

fn etag(recs: &[&StageRecord]) -> String {
    let parts: Vec<(&str, &[u8])> = recs.iter().map(|r| ("stage", r.hash.as_bytes())).collect();
    format!("\"{}\"", &sha256_parts(parts)[..32])
}

fn read(store: &Store, rec: &StageRecord, rel: &str) -> ApiResult<Value> {
    store.read_json(rec, rel).map_err(|e| ApiError::Internal(e.message))
}

fn topic_records(store: &Store, m: &Manifest) -> ApiResult<Vec<TopicRecord>> {
    store
        .read_json(fresh(m, Stage::Topics)?, "topics.json")
        .map_err(|e| ApiError::Internal(e.message))
}

fn known_topic(store: &Store, m: &Manifest, id: i64) -> ApiResult<TopicRecord> {
    topic_records(store, m)?
        .into_iter()
        .find(|r| r.topic_id == id)
        .ok_or_else(|| ApiError::NotFound(format!("unknown topic {id}")))
}

/// Per-topic file of the metrics stage; noise and empty topics have none.
fn metrics_file(store: &Store, m: &Manifest, id: i64, rel: &str) -> ApiResult<Projection> {
    let rec = fresh(m, Stage::Metrics)?;
    known_topic(store, m, id)?;
    if !rec.artifacts.contains_key(rel) {
        return Err(ApiError::NotFound(format!("topic {id} has no metrics")));
    }
    Ok(Projection {
        etag: etag(&[rec]),
        body: read(store, rec, rel)?,
    })
}

pub fn topics(store: &Store, m: &Manifest) -> ApiResult<Projection> {
    let rec = fresh(m, Stage::Topics)?;
    Ok(Projection {
        etag: etag(&[rec]),
        body: read(store, rec, "topic_tree.json")?,
    })
}

pub fn topic(store: &Store, m: &Manifest, id: i64) -> ApiResult<Projection> {
    let rec = fresh(m, Stage::Topics)?;
    let record = known_topic(store, m, id)?;
    let quality = read(store, rec, "topic_quality.json")?;
    let flags = quality["topics"].get(id.to_string()).cloned().unwrap_or_else(|| json!([]));
    Ok(Projection {
        etag: etag(&[rec]),
        body: json!({
            "record": serde_json::to_value(&record).expect("record"),
            "quality": { "clustering": quality["clustering"], "flags": flags },
        }),
    })
}

pub fn spectrum(store: &Store, m: &Manifest, id: i64, mode: &str, entity: Option<&str>) -> ApiResult<Projection> {
    match mode {
        "title" | "body" => {
            if entity.is_some() {
                return Err(ApiError::BadRequest("entity is only valid with mode=entity".into()));
            }
            metrics_file(store, m, id, &format!("spectrum/{id}/{mode}.json"))
        }
        "entity" => {
            let mut p = metrics_file(store, m, id, &format!("spectrum/{id}/entity.json"))?;
            if let Some(raw) = entity {
                let key: EntityKey = raw.parse().map_err(ApiError::BadRequest)?;
                let wanted = serde_json::to_value(&key).expect("key");
                let found = p
                    .body
                    .as_array()
                    .and_then(|all| all.iter().find(|s| s["subject"]["value"] == wanted).cloned())
                    .ok_or_else(|| ApiError::NotFound(format!("entity {key} is not analyzed in topic {id}")))?;
                p.body = found;
            }
            Ok(p)
        }
        other => Err(ApiError::BadRequest(format!("mode must be title, body or entity, not {other:?}"))),
    }
}

pub fn entities(store: &Store, m: &Manifest, id: i64) -> ApiResult<Projection> {
    metrics_file(store, m, id, &format!("entities/{id}.json"))
}

pub fn map(store: &Store, m: &Manifest, id: i64) -> ApiResult<Projection> {
    metrics_file(store, m, id, &format!("map/{id}.json"))
}

pub fn cross_topic(store: &Store, m: &Manifest, mode: &str) -> ApiResult<Projection> {
    if mode != "title" && mode != "body" {
        return Err(ApiError::BadRequest(format!("mode must be title or body, not {mode:?}")));
    }
    let rec = fresh(m, Stage::Metrics)?;
    let all = read(store, rec, "cross_topic.json")?;
    let body = all
        .as_array()
        .and_then(|a| a.iter().find(|c| c["doc_kind"] == mode).cloned())
        .ok_or_else(|| ApiError::Internal("cross_topic.json lacks the requested mode".into()))?;
    Ok(Projection {
        etag: etag(&[rec]),
        body,
    })
}

/// Topic graph with an optional domain (newspaper) or local (article) filter.
/// Degrees and communities stay those of the topic's core graph.
pub fn ontology_view(store: &Store, m: &Manifest, id: i64, filter: &GraphFilter) -> ApiResult<OntologyGraph> {
    let rec = fresh(m, Stage::Audit)?;
    let record = known_topic(store, m, id)?;
    if let Some(a) = &filter.article_id {
        if !record.article_ids.contains(a) {
            return Err(ApiError::NotFound(format!("article {a} is not in topic {id}")));
        }
    }
    if let Some(n) = &filter.newspaper_id {
        if !record.newspaper_ids.contains(n) {
            return Err(ApiError::NotFound(format!("newspaper {n} has no articles in topic {id}")));
        }
    }
    let rel = format!("ontology/{id}.json");
    if !rec.artifacts.contains_key(&rel) {
        return Err(ApiError::NotFound(format!("topic {id} has no ontology")));
    }
    let graph: OntologyGraph = store.read_json(rec, &rel).map_err(|e| ApiError::Internal(e.message))?;
    Ok(filter_graph(&graph, filter, false))
}

pub fn ontology(store: &Store, m: &Manifest, id: i64, filter: &GraphFilter) -> ApiResult<Projection> {
    let graph = ontology_view(store, m, id, filter)?;
    Ok(Projection {
        etag: etag(&[fresh(m, Stage::Audit)?]),
        body: serde_json::to_value(&graph).expect("graph"),
    })
}

pub fn newspapers(store: &Store, m: &Manifest) -> ApiResult<Projection> {
    let rec = fresh(m, Stage::Corpus)?;
    let corpus: Corpus = store.read_json(rec, "corpus.json").map_err(|e| ApiError::Internal(e.message))?;
    let stats: CorpusStats = store
        .read_json(rec, "corpus_stats.json")
        .map_err(|e| ApiError::Internal(e.message))?;
    let rows: Vec<Value> = corpus
        .newspapers()
        .iter()
        .map(|n| {
            let mut v = serde_json::to_value(n).expect("newspaper");
            v["article_count"] = json!(stats.per_newspaper.get(&n.id).copied().unwrap_or(0));
            v
        })
        .collect();
    Ok(Projection {
        etag: etag(&[rec]),
        body: Value::Array(rows),
    })
}

// ---------------------------------------------------------------------------
// HTTP layer

#[derive(Debug, Default, Deserialize)]
struct SpectrumQuery {
    mode: Option<String>,
    entity: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
struct OntologyQuery {
    newspaper: Option<String>,
    article: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
struct ModeQuery {
    mode: Option<String>,
}

type Shared = Arc<Store>;

fn topic_id(raw: &str) -> ApiResult<i64> {
    raw.parse().map_err(|_| ApiError::NotFound(format!("unknown topic {raw:?}")))
}

async fn respond<F>(store: Shared, headers: HeaderMap, f: F) -> Response
where
    F: FnOnce(&Store, &Manifest) -> ApiResult<Projection> + Send + 'static,
{
    let result = tokio::task::spawn_blocking(move || {
        let m = store.manifest().map_err(ApiError::from_cli)?;
        f(&store, &m)
    })
    .await
    .unwrap_or_else(|e| Err(ApiError::Internal(e.to_string())));
    match result {
        Ok(p) => {
            let tag = HeaderValue::from_str(&p.etag).expect("hex etag");
            let cache = (header::CACHE_CONTROL, HeaderValue::from_static("no-cache"));
            if headers.get(header::IF_NONE_MATCH) == Some(&tag) {
                return (StatusCode::NOT_MODIFIED, [(header::ETAG, tag), cache]).into_response();
            }
            let body = serde_json::to_vec(&p.body).expect("json");
            (
                StatusCode::OK,
                [
                    (header::CONTENT_TYPE, HeaderValue::from_static("application/json")),
                    (header::ETAG, tag),
                    cache,
                ],
                body,
            )
                .into_response()
        }
        Err(e) => {
            let body = serde_json::to_vec(&e.body()).expect("json");
            (e.status(), [(header::CONTENT_TYPE, HeaderValue::from_static("application/json"))], body).into_response()
        }
    }
}

async fn h_topics(State(s): State<Shared>, h: HeaderMap) -> Response {
    respond(s, h, topics).await
}

async fn h_topic(State(s): State<Shared>, h: HeaderMap, Path(id): Path<String>) -> Response {
    respond(s, h, move |st, m| topic(st, m, topic_id(&id)?)).await
}

async fn h_spectrum(State(s): State<Shared>, h: HeaderMap, Path(id): Path<String>, Query(q): Query<SpectrumQuery>) -> Response {
    respond(s, h, move |st, m| {
        let mode = q.mode.as_deref().unwrap_or("title");
        spectrum(st, m, topic_id(&id)?, mode, q.entity.as_deref())
    })
    .await
}

async fn h_entities(State(s): State<Shared>, h: HeaderMap, Path(id): Path<String>) -> Response {
    respond(s, h, move |st, m| entities(st, m, topic_id(&id)?)).await
}

async fn h_ontology(State(s): State<Shared>, h: HeaderMap, Path(id): Path<String>, Query(q): Query<OntologyQuery>) -> Response {
    respond(s, h, move |st, m| {
        let filter = GraphFilter {
            newspaper_id: q.newspaper.filter(|x| !x.is_empty()),
            article_id: q.article.filter(|x| !x.is_empty()),
        };
        ontology(st, m, topic_id(&id)?, &filter)
    })
    .await
}

async fn h_map(State(s): State<Shared>, h: HeaderMap, Path(id): Path<String>) -> Response {
    respond(s, h, move |st, m| map(st, m, topic_id(&id)?)).await
}

async fn h_cross(State(s): State<Shared>, h: HeaderMap, Query(q): Query<ModeQuery>) -> Response {
    respond(s, h, move |st, m| cross_topic(st, m, q.mode.as_deref().unwrap_or("title"))).await
}

async fn h_newspapers(State(s): State<Shared>, h: HeaderMap) -> Response {
    respond(s, h, newspapers).await
}

async fn h_fallback() -> Response {
    let e = ApiError::NotFound("no such endpoint".into());
    (e.status(), axum::Json(e.body())).into_response()
}

pub fn router(store: Store) -> Router {
    Router::new()
        .route("/api/topics", get(h_topics))
        .route("/api/topics/{id}", get(h_topic))
        .route("/api/topics/{id}/spectrum", get(h_spectrum))
        .route("/api/topics/{id}/entities", get(h_entities))
        .route("/api/topics/{id}/ontology", get(h_ontology))
        .route("/api/topics/{id}/map", get(h_map))
        .route("/api/cross-topic", get(h_cross))
        .route("/api/newspapers", get(h_newspapers))
        .fallback(h_fallback)
        .with_state(Arc::new(store))
}

/// Serve until Ctrl-C.
pub async fn serve(store: Store, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("biaslens API listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(store))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
