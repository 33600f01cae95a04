//! Stage builders behind the mutating CLI subcommands.
//!
//! Each builder checks its upstream stages, computes its outputs from the
//! stored snapshot and commits them as one new stage version.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use biaslens_core::biasmetrics::{
    article_spectrum, cross_topic_sentiment, entity_spectrum, map_points, newspaper_mean_sentiment, rate_deviation,
    sentiment_deviation, MapData, Scope, SentimentSummary, Spectrum, Subject, TopicShare,
};
use biaslens_core::clustering::{
    extract_clusters, hdbscan_fit, load_embeddings_binary, load_embeddings_jsonl, quality_report, ClusterAssignment,
    CondensedTree, EmbeddingSet, HdbscanParams, Passthrough, Pca, QualityReport, QualityThresholds, Reducer,
};
use biaslens_core::corpus::{filter_language, ingest_corpus, load_noise_rules, CleanedBody, LanguagePartition, NoiseRuleSet};
use biaslens_core::entities::{
    analyzed_entities, entity_newspaper_stats, export_contexts, load_entity_sentiment, load_mentions, top_entities,
    AliasMap, ContextRecord, EntityCount, EntityKey, EntityMention, EntitySentiment, EntitySentimentSet, MentionSet,
};
use biaslens_core::ontology::{
    build_graph, build_prompt, check_consistency, extract_batch, gexf_string, prune, write_edge_csv, CannedLlm,
    ConsistencyReport, ExtractConfig, LlmClient, OntologyDocument, OntologyGraph, RecordingSleeper, Sleeper,
    ThreadSleeper,
};
use biaslens_core::scoring::{
    baseline_lexicon_score, baseline_scores, load_scores, truncation_audit, ScoreLoadReport, ScoreSet,
    BASELINE_MODEL_ID, DEFAULT_TOKEN_LIMIT,
};
use biaslens_core::topics::{TopicConfig, TopicDocument, TopicRecord, TopicTree};
use biaslens_core::{Corpus, DocKind, DocumentSentiment};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{CliError, CliResult};
use crate::llm::HttpLlm;
use crate::store::{Manifest, Stage, StageRecord, Store};

/// Result of one subcommand, printed as text or JSON.
#[derive(Debug, Clone, Serialize)]
pub struct Outcome {
    pub command: String,
    /// Stages written by the command with their new hashes.
    pub stages: BTreeMap<Stage, String>,
    pub summary: Value,
    pub warnings: Vec<String>,
}

impl Outcome {
    pub fn new(command: &str, summary: Value) -> Self {
        Self {
            command: command.to_string(),
            stages: BTreeMap::new(),
            summary,
            warnings: Vec::new(),
        }
    }

    fn built(mut self, stage: Stage, rec: &StageRecord) -> Self {
        self.stages.insert(stage, rec.hash.clone());
        self
    }
}

fn validation<E: std::fmt::Display>(what: &str) -> impl FnOnce(E) -> CliError + '_ {
    move |e| CliError::validation(format!("{what}: {e}"))
}

fn open_file(path: &Path) -> CliResult<fs::File> {
    fs::File::open(path).map_err(|e| CliError::io(path.display(), e))
}

fn read_file(path: &Path) -> CliResult<Vec<u8>> {
    fs::read(path).map_err(|e| CliError::io(path.display(), e))
}

fn read_aliases(path: &Path) -> CliResult<AliasMap> {
    serde_json::from_slice(&read_file(path)?).map_err(validation("alias file must be a JSON object of strings"))
}

/// Quote an argument for the recorded rebuild command.
pub fn shell_arg(s: &str) -> String {
    if !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || "/._-=:,+@".contains(c)) {
        s.to_string()
    } else {
        format!("'{}'", s.replace('\'', r"'\''"))
    }
}

pub fn abs(path: &Path) -> String {
    std::path::absolute(path).unwrap_or_else(|_| path.to_path_buf()).display().to_string()
}

// ---------------------------------------------------------------------------
// snapshot loaders

pub fn load_corpus(store: &Store, m: &Manifest) -> CliResult<Corpus> {
    store.read_json(m.require(Stage::Corpus)?, "corpus.json")
}

/// Kept articles with their cleaned bodies, in corpus order.
pub struct Cleaned {
    pub corpus: Corpus,
    pub kept: Vec<String>,
    pub bodies: BTreeMap<String, String>,
}

impl Cleaned {
    pub fn newspaper_of(&self) -> BTreeMap<String, String> {
        self.corpus
            .articles()
            .iter()
            .map(|a| (a.id.clone(), a.newspaper_id.clone()))
            .collect()
    }
}

pub fn load_cleaned(store: &Store, m: &Manifest) -> CliResult<Cleaned> {
    let corpus = load_corpus(store, m)?;
    let rec = m.require(Stage::Clean)?;
    let cleaned: Vec<CleanedBody> = store.read_jsonl(rec, "cleaned.jsonl")?;
    let kept = cleaned.iter().map(|c| c.article_id.clone()).collect();
    let bodies = cleaned.into_iter().map(|c| (c.article_id, c.body)).collect();
    Ok(Cleaned { corpus, kept, bodies })
}

pub fn load_topics(store: &Store, m: &Manifest) -> CliResult<Vec<TopicRecord>> {
    store.read_json(m.require(Stage::Topics)?, "topics.json")
}

pub fn load_mention_set(store: &Store, m: &Manifest) -> CliResult<(MentionSet, AliasMap)> {
    let rec = m.require(Stage::Entities)?;
    let mentions: Vec<EntityMention> = store.read_jsonl(rec, "entities.jsonl")?;
    let aliases: AliasMap = store.read_json(rec, "aliases.json")?;
    Ok((MentionSet::new(mentions), aliases))
}

fn base_article_sets(records: &[TopicRecord]) -> Vec<(i64, BTreeSet<&str>)> {
    records
        .iter()
        .filter(|r| r.level == 0 && !r.is_noise())
        .map(|r| (r.topic_id, r.article_ids.iter().map(String::as_str).collect()))
        .collect()
}

// ---------------------------------------------------------------------------
// init / config

pub fn init(root: &Path, name: &str, sets: &[(String, String)], force: bool) -> CliResult<Outcome> {
    let mut config = crate::config::ProjectConfig::default();
    for (k, v) in sets {
        config.set(k, v)?;
    }
    let store = Store::init(root, name, config.clone(), force)?;
    Ok(Outcome::new(
        "init",
        json!({ "project": store.root().display().to_string(), "name": name, "config": config }),
    ))
}

pub fn config_set(store: &Store, key: &str, value: &str) -> CliResult<Outcome> {
    let _lock = store.lock()?;
    let before = store.manifest()?;
    let fresh_before: BTreeSet<Stage> = before.stages.keys().copied().filter(|s| !before.stale_stages().contains(s)).collect();
    let mut m = before.clone();
    m.config.set(key, value)?;
    store.save_manifest(&m)?;
    let stale = m.stale_stages();
    let invalidated: Vec<Stage> = fresh_before.intersection(&stale).copied().collect();
    Ok(Outcome::new(
        "config set",
        json!({ "key": key, "value": m.config.get(key)?, "invalidated": invalidated }),
    ))
}

pub fn config_get(store: &Store, key: Option<&str>) -> CliResult<Outcome> {
    let m = store.manifest()?;
    let value = match key {
        Some(k) => m.config.get(k)?,
        None => serde_json::to_value(&m.config).expect("config serializes"),
    };
    Ok(Outcome::new("config get", value))
}

pub fn status(store: &Store) -> CliResult<Outcome> {
    let m = store.manifest()?;
    let stages: BTreeMap<Stage, Value> = Stage::ALL
        .into_iter()
        .map(|s| {
            let st = m.status(s);
            let hash = m.record(s).map(|r| r.hash.clone());
            (s, json!({ "state": st, "hash": hash }))
        })
        .collect();
    Ok(Outcome::new("status", json!({ "name": m.name, "stages": stages })))
}

// ---------------------------------------------------------------------------
// ingest

#[derive(Debug, Clone, Default)]
pub struct IngestArgs {
    pub articles: Option<PathBuf>,
    pub newspapers: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    /// Manifest of the binary embedding variant.
    pub embeddings_bin: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct EmbeddingLine<'a> {
    article_id: &'a str,
    vector: &'a [f64],
}

pub fn ingest(store: &Store, args: &IngestArgs) -> CliResult<Outcome> {
    let _lock = store.lock()?;
    let mut out = Outcome::new("ingest", json!({}));
    let mut summary = serde_json::Map::new();
    match (&args.articles, &args.newspapers) {
        (Some(a), Some(n)) => {
            let ingested = ingest_corpus(a, n).map_err(|e| CliError::validation(e.to_string()))?;
            let mut w = store.begin(Stage::Corpus)?;
            w.note_input("articles", &read_file(a)?);
            w.note_input("newspapers", &read_file(n)?);
            w.put_bytes("corpus.json", &ingested.corpus.to_canonical_json())?;
            w.put_json("corpus_stats.json", &ingested.stats)?;
            w.put_json(
                "ingest_errors.json",
                &json!({ "newspapers": ingested.newspaper_errors, "articles": ingested.article_errors }),
            )?;
            let cmd = format!(
                "biaslens ingest --articles {} --newspapers {}",
                shell_arg(&abs(a)),
                shell_arg(&abs(n))
            );
            let rec = w.commit(store, &cmd)?;
            out.warnings.extend(
                ingested
                    .newspaper_errors
                    .iter()
                    .chain(&ingested.article_errors)
                    .map(|e| format!("line {}: {}", e.line, e.message)),
            );
            summary.insert("stats".into(), serde_json::to_value(&ingested.stats).expect("stats"));
            summary.insert(
                "rejected".into(),
                json!(ingested.newspaper_errors.len() + ingested.article_errors.len()),
            );
            out = out.built(Stage::Corpus, &rec);
        }
        (None, None) => {}
        _ => return Err(CliError::validation("--articles and --newspapers must be given together")),
    }
    let embeddings = match (&args.embeddings, &args.embeddings_bin) {
        (Some(_), Some(_)) => return Err(CliError::validation("give one of --embeddings and --embeddings-bin")),
        (Some(p), None) => Some((
            load_embeddings_jsonl(BufReader::new(open_file(p)?)).map_err(|e| CliError::validation(e.to_string()))?,
            format!("biaslens ingest --embeddings {}", shell_arg(&abs(p))),
            read_file(p)?,
        )),
        (None, Some(p)) => Some((
            load_embeddings_binary(p).map_err(|e| CliError::validation(e.to_string()))?,
            format!("biaslens ingest --embeddings-bin {}", shell_arg(&abs(p))),
            read_file(p)?,
        )),
        (None, None) => None,
    };
    if let Some((set, cmd, raw)) = embeddings {
        let m = store.manifest()?;
        let corpus = load_corpus(store, &m)?;
        let unknown: Vec<&String> = set.article_ids().iter().filter(|id| corpus.article(id).is_none()).collect();
        let have: BTreeSet<&str> = set.article_ids().iter().map(String::as_str).collect();
        let without: Vec<&str> = corpus.articles().iter().map(|a| a.id.as_str()).filter(|id| !have.contains(id)).collect();
        let mut w = store.begin(Stage::Embeddings)?;
        w.note_input("embeddings", &raw);
        let known = set.filter(|id| corpus.article(id).is_some());
        w.put_jsonl(
            "embeddings.jsonl",
            known
                .article_ids()
                .iter()
                .zip(known.rows())
                .map(|(id, v)| EmbeddingLine { article_id: id, vector: v }),
        )?;
        let report = json!({
            "count": known.len(),
            "dim": known.dim(),
            "unknown_article_ids": unknown,
            "articles_without_vector": without,
        });
        w.put_json("embeddings_report.json", &report)?;
        let rec = w.commit(store, &cmd)?;
        if !unknown.is_empty() {
            out.warnings.push(format!("{} embedding(s) name unknown articles and were dropped", unknown.len()));
        }
        summary.insert("embeddings".into(), report);
        out = out.built(Stage::Embeddings, &rec);
    }
    if out.stages.is_empty() {
        return Err(CliError::validation(
            "nothing to ingest; pass --articles/--newspapers and/or --embeddings",
        ));
    }
    out.summary = Value::Object(summary);
    Ok(out)
}

// ---------------------------------------------------------------------------
// clean

pub fn clean(store: &Store, noise_rules: Option<&Path>) -> CliResult<Outcome> {
    let _lock = store.lock()?;
    let m = store.manifest()?;
    m.require_upstream(Stage::Clean)?;
    let corpus = load_corpus(store, &m)?;
    let rules = match noise_rules {
        Some(p) => load_noise_rules(p).map_err(|e| CliError::validation(e.to_string()))?,
        None => Vec::new(),
    };
    let set = NoiseRuleSet::compile(&rules).map_err(|e| CliError::validation(e.to_string()))?;
    let partition: LanguagePartition = filter_language(&corpus, &m.config.language.keep);
    let kept: BTreeSet<&str> = partition.kept.iter().map(String::as_str).collect();
    let cleaned: Vec<CleanedBody> = corpus
        .articles()
        .iter()
        .filter(|a| kept.contains(a.id.as_str()))
        .map(|a| set.clean(a))
        .collect();
    let emptied: Vec<&str> = cleaned.iter().filter(|c| c.emptied).map(|c| c.article_id.as_str()).collect();
    let report = json!({
        "kept": partition.kept.len(),
        "removed": partition.removed.len(),
        "rules": set.rule_count(),
        "chars_removed": cleaned.iter().map(|c| c.removed_chars).sum::<usize>(),
        "emptied": emptied,
    });
    let mut w = store.begin(Stage::Clean)?;
    w.put_json("language.json", &partition)?;
    w.put_jsonl("cleaned.jsonl", &cleaned)?;
    w.put_json("noise_rules.json", &rules)?;
    w.put_json("clean_report.json", &report)?;
    let cmd = match noise_rules {
        Some(p) => format!("biaslens clean --noise-rules {}", shell_arg(&abs(p))),
        None => "biaslens clean".to_string(),
    };
    let rec = w.commit(store, &cmd)?;
    let mut out = Outcome::new("clean", report).built(Stage::Clean, &rec);
    out.warnings.extend(partition.warnings.iter().cloned());
    out.warnings.extend(emptied.iter().map(|id| format!("noise rules emptied the body of {id}")));
    Ok(out)
}

// ---------------------------------------------------------------------------
// cluster

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AssignmentRow {
    pub article_id: String,
    pub cluster_id: i64,
    pub strength: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClustersFile {
    pub params: HdbscanParams,
    pub reduce_dim: Option<usize>,
    pub assignments: Vec<AssignmentRow>,
    pub condensed_tree: CondensedTree,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct VectorLine {
    article_id: String,
    vector: Vec<f64>,
}

pub fn cluster(store: &Store) -> CliResult<Outcome> {
    let _lock = store.lock()?;
    let m = store.manifest()?;
    m.require_upstream(Stage::Clusters)?;
    let cleaned = load_cleaned(store, &m)?;
    let emb_rec = m.require(Stage::Embeddings)?;
    let raw = store.read_bytes(emb_rec, "embeddings.jsonl")?;
    let all = load_embeddings_jsonl(raw.as_slice()).map_err(|e| CliError::validation(e.to_string()))?;
    let kept: BTreeSet<&str> = cleaned.kept.iter().map(String::as_str).collect();
    let set: EmbeddingSet = all.filter(|id| kept.contains(id));
    let have: BTreeSet<&str> = set.article_ids().iter().map(String::as_str).collect();
    let mut warnings: Vec<String> = cleaned
        .kept
        .iter()
        .filter(|id| !have.contains(id.as_str()))
        .map(|id| format!("article {id} has no embedding and is not clustered"))
        .collect();

    let cfg = &m.config.clustering;
    let reduced = match cfg.reduce_dim {
        Some(d) => Pca { target_dim: d }.reduce(&set),
        None => Passthrough.reduce(&set),
    }
    .map_err(|e| CliError::validation(e.to_string()))?;
    warnings.extend(reduced.warnings.iter().cloned());
    let params = HdbscanParams {
        min_cluster_size: cfg.min_cluster_size,
        min_samples: cfg.min_samples,
        allow_single_cluster: cfg.allow_single_cluster,
    };
    let tree = hdbscan_fit(&reduced.embeddings, &params).map_err(|e| CliError::validation(e.to_string()))?;
    let labels = extract_clusters(&tree, params.allow_single_cluster);
    let assignment = ClusterAssignment::new(&reduced.embeddings, &labels);
    let thresholds = QualityThresholds {
        noise: m.config.quality.noise,
        dominance: m.config.quality.dominance,
    };
    let quality = quality_report(&assignment, &thresholds);
    let file = ClustersFile {
        params,
        reduce_dim: cfg.reduce_dim,
        assignments: assignment
            .article_ids
            .iter()
            .zip(&assignment.labels)
            .zip(&assignment.strengths)
            .map(|((id, &l), &s)| AssignmentRow {
                article_id: id.clone(),
                cluster_id: l,
                strength: s,
            })
            .collect(),
        condensed_tree: tree,
    };
    let mut w = store.begin(Stage::Clusters)?;
    w.put_json("clusters.json", &file)?;
    w.put_json("quality.json", &quality)?;
    w.put_jsonl(
        "reduced.jsonl",
        reduced
            .embeddings
            .article_ids()
            .iter()
            .zip(reduced.embeddings.rows())
            .map(|(id, v)| EmbeddingLine { article_id: id, vector: v }),
    )?;
    let rec = w.commit(store, "biaslens cluster")?;
    for f in &quality.flags {
        warnings.push(format!("quality flag raised: {}", serde_json::to_value(f).expect("flag")));
    }
    let mut out = Outcome::new(
        "cluster",
        json!({
            "points": assignment.len(),
            "clusters": assignment.cluster_count(),
            "quality": quality,
        }),
    )
    .built(Stage::Clusters, &rec);
    out.warnings = warnings;
    Ok(out)
}

// ---------------------------------------------------------------------------
// topics

/// Per-topic red flags shown with the topic record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicQuality {
    pub clustering: QualityReport,
    pub topics: BTreeMap<i64, Vec<String>>,
}

pub fn topics(store: &Store) -> CliResult<Outcome> {
    let _lock = store.lock()?;
    let m = store.manifest()?;
    m.require_upstream(Stage::Topics)?;
    let cleaned = load_cleaned(store, &m)?;
    let crec = m.require(Stage::Clusters)?;
    let clusters: ClustersFile = store.read_json(crec, "clusters.json")?;
    let quality: QualityReport = store.read_json(crec, "quality.json")?;
    let vectors: BTreeMap<String, Vec<f64>> = store
        .read_jsonl::<VectorLine>(crec, "reduced.jsonl")?
        .into_iter()
        .map(|v| (v.article_id, v.vector))
        .collect();
    let mut docs = Vec::with_capacity(clusters.assignments.len());
    for row in &clusters.assignments {
        let article = cleaned
            .corpus
            .article(&row.article_id)
            .ok_or_else(|| CliError::validation(format!("clustered article {} is not in the corpus", row.article_id)))?;
        let body = cleaned.bodies.get(&row.article_id).map(String::as_str).unwrap_or(&article.body);
        docs.push(TopicDocument {
            article_id: row.article_id.clone(),
            newspaper_id: article.newspaper_id.clone(),
            text: format!("{}\n{}", article.title, body),
            vector: vectors.get(&row.article_id).cloned(),
        });
    }
    let labels: Vec<i64> = clusters.assignments.iter().map(|r| r.cluster_id).collect();
    let tc = &m.config.topics;
    let config = TopicConfig {
        top_n_terms: tc.top_n_terms,
        name_terms: tc.name_terms,
    };
    let base = TopicTree::from_clusters(&docs, &labels, config).map_err(validation("topics"))?;
    let (tree, merge) = if tc.merge_single_source {
        let (t, r) = base.merge_single_source_topics().map_err(validation("topics"))?;
        (t, Some(r))
    } else {
        (base, None)
    };
    let tree = tree.build_hierarchy().map_err(validation("topics"))?;
    tree.validate().map_err(|e| CliError::validation(format!("topic tree is inconsistent: {e}")))?;

    let total = docs.len().max(1) as f64;
    let mut flags = BTreeMap::new();
    for r in tree.records().filter(|r| !r.is_noise()) {
        let mut f = Vec::new();
        if r.newspaper_ids.len() == 1 {
            f.push("single_newspaper".to_string());
        }
        if r.level == 0 && r.article_ids.len() as f64 / total > m.config.quality.dominance {
            f.push("dominant_topic".to_string());
        }
        flags.insert(r.topic_id, f);
    }
    let tq = TopicQuality {
        clustering: quality,
        topics: flags,
    };
    let records = tree.to_records();
    let view = tree.tree_view();
    let mut w = store.begin(Stage::Topics)?;
    w.put_json("topics.json", &records)?;
    w.put_json("topic_tree.json", &view)?;
    w.put_json("merge_report.json", &merge)?;
    w.put_json("topic_quality.json", &tq)?;
    let rec = w.commit(store, "biaslens topics")?;
    let mut out = Outcome::new(
        "topics",
        json!({
            "base_topics": tree.base_topics().count(),
            "topics_with_parents": records.len() - 1,
            "max_level": view.max_level,
            "noise_articles": tree.noise().article_ids.len(),
            "merge": merge.as_ref().map(|r| json!({
                "moved": r.moved.len(),
                "topics_before": r.topics_before,
                "topics_after": r.topics_after,
            })),
        }),
    )
    .built(Stage::Topics, &rec);
    out.warnings.extend(tree.warnings().iter().cloned());
    Ok(out)
}

// ---------------------------------------------------------------------------
// scores

pub fn score_load(store: &Store, file: Option<&Path>, baseline: bool) -> CliResult<Outcome> {
    if file.is_some() == baseline {
        return Err(CliError::validation("give exactly one of --file and --baseline"));
    }
    let _lock = store.lock()?;
    let m = store.manifest()?;
    m.require_upstream(Stage::Scores)?;
    let cleaned = load_cleaned(store, &m)?;
    let docs: Vec<(&str, &str, &str)> = cleaned
        .kept
        .iter()
        .filter_map(|id| {
            let a = cleaned.corpus.article(id)?;
            Some((a.id.as_str(), a.title.as_str(), cleaned.bodies[id].as_str()))
        })
        .collect();
    let mut w = store.begin(Stage::Scores)?;
    let (set, report, cmd) = match (file, baseline) {
        (Some(p), false) => {
            let raw = read_file(p)?;
            w.note_input("sentiment", &raw);
            let (set, report) = load_scores(raw.as_slice(), &cleaned.corpus).map_err(|e| CliError::io(p.display(), e))?;
            (set, report, format!("biaslens score-load --file {}", shell_arg(&abs(p))))
        }
        (None, true) => {
            let set = baseline_scores(docs.iter().copied());
            let report = coverage_report(&set, &cleaned.corpus);
            (set, report, "biaslens score-load --baseline".to_string())
        }
        _ => unreachable!("checked above"),
    };
    let truncated = truncation_audit(docs.iter().copied(), DEFAULT_TOKEN_LIMIT);
    w.put_bytes("sentiment.jsonl", set.to_jsonl().as_bytes())?;
    w.put_json("score_report.json", &report)?;
    w.put_json("truncation.json", &truncated)?;
    let rec = w.commit(store, &cmd)?;
    let mut out = Outcome::new(
        "score-load",
        json!({
            "loaded": report.loaded,
            "rejected": report.rejected.len(),
            "coverage": report.coverage,
            "over_token_limit": truncated.len(),
            "models": { "title": set.models(DocKind::Title), "body": set.models(DocKind::Body) },
        }),
    )
    .built(Stage::Scores, &rec);
    out.warnings
        .extend(report.rejected.iter().map(|e| format!("line {}: {}", e.line, e.message)));
    Ok(out)
}

fn coverage_report(set: &ScoreSet, corpus: &Corpus) -> ScoreLoadReport {
    let n = corpus.len().max(1) as f64;
    let coverage = DocKind::ALL
        .into_iter()
        .map(|k| {
            let ids: BTreeSet<&str> = set
                .records()
                .iter()
                .filter(|r| r.doc_kind == k)
                .map(|r| r.article_id.as_str())
                .collect();
            (k, ids.len() as f64 / n)
        })
        .collect();
    ScoreLoadReport {
        loaded: set.len(),
        rejected: Vec::new(),
        coverage,
    }
}

// ---------------------------------------------------------------------------
// entities

#[derive(Debug, Clone, Default)]
pub struct EntitiesArgs {
    pub mentions: Option<PathBuf>,
    pub aliases: Option<PathBuf>,
    pub sentiment: Option<PathBuf>,
    pub baseline_sentiment: bool,
}

pub fn entities_load(store: &Store, args: &EntitiesArgs) -> CliResult<Outcome> {
    let _lock = store.lock()?;
    let mut out = Outcome::new("entities-load", json!({}));
    let mut summary = serde_json::Map::new();
    if args.mentions.is_none() && args.aliases.is_some() {
        return Err(CliError::validation("--aliases needs --mentions"));
    }
    if let Some(p) = &args.mentions {
        let m = store.manifest()?;
        m.require_upstream(Stage::Entities)?;
        let cleaned = load_cleaned(store, &m)?;
        let raw = read_file(p)?;
        let (set, errors) = load_mentions(raw.as_slice(), &cleaned.bodies).map_err(|e| CliError::io(p.display(), e))?;
        let aliases = match &args.aliases {
            Some(a) => read_aliases(a)?,
            None => AliasMap::new(),
        };
        let mut w = store.begin(Stage::Entities)?;
        w.note_input("entities", &raw);
        w.put_jsonl("entities.jsonl", set.mentions())?;
        w.put_json("aliases.json", &aliases)?;
        w.put_json("entity_errors.json", &errors)?;
        let mut cmd = format!("biaslens entities-load --mentions {}", shell_arg(&abs(p)));
        if let Some(a) = &args.aliases {
            cmd.push_str(&format!(" --aliases {}", shell_arg(&abs(a))));
        }
        let rec = w.commit(store, &cmd)?;
        out.warnings
            .extend(errors.iter().map(|e| format!("line {}: {}", e.line, e.message)));
        summary.insert("mentions".into(), json!({ "loaded": set.len(), "rejected": errors.len() }));
        out = out.built(Stage::Entities, &rec);
    }
    match (&args.sentiment, args.baseline_sentiment) {
        (Some(_), true) => return Err(CliError::validation("give one of --sentiment and --baseline-sentiment")),
        (Some(p), false) => {
            let m = store.manifest()?;
            m.require_upstream(Stage::EntitySentiment)?;
            let (mentions, _) = load_mention_set(store, &m)?;
            let raw = read_file(p)?;
            let (set, errors) =
                load_entity_sentiment(raw.as_slice(), &mentions).map_err(|e| CliError::io(p.display(), e))?;
            let mut w = store.begin(Stage::EntitySentiment)?;
            w.note_input("entity_sentiment", &raw);
            w.put_jsonl("entity_sentiment.jsonl", set.records())?;
            w.put_json("entity_sentiment_errors.json", &errors)?;
            let rec = w.commit(store, &format!("biaslens entities-load --sentiment {}", shell_arg(&abs(p))))?;
            out.warnings
                .extend(errors.iter().map(|e| format!("line {}: {}", e.line, e.message)));
            summary.insert("sentiment".into(), json!({ "loaded": set.len(), "rejected": errors.len() }));
            out = out.built(Stage::EntitySentiment, &rec);
        }
        (None, true) => {
            let m = store.manifest()?;
            m.require_upstream(Stage::EntitySentiment)?;
            let contexts: Vec<ContextRecord> = store.read_jsonl(m.require(Stage::Contexts)?, "contexts.jsonl")?;
            let records: Vec<EntitySentiment> = contexts
                .iter()
                .map(|c| {
                    let p = baseline_lexicon_score(&format!("{}{}{}", c.left, c.target, c.right));
                    EntitySentiment {
                        mention_id: c.mention_id.clone(),
                        positive: p.positive,
                        neutral: p.neutral,
                        negative: p.negative,
                        simplified: p.simplified(),
                        model_id: BASELINE_MODEL_ID.to_string(),
                    }
                })
                .collect();
            let mut w = store.begin(Stage::EntitySentiment)?;
            w.put_jsonl("entity_sentiment.jsonl", &records)?;
            w.put_json("entity_sentiment_errors.json", &Vec::<Value>::new())?;
            let rec = w.commit(store, "biaslens entities-load --baseline-sentiment")?;
            summary.insert("sentiment".into(), json!({ "loaded": records.len(), "rejected": 0 }));
            out = out.built(Stage::EntitySentiment, &rec);
        }
        (None, false) => {}
    }
    if out.stages.is_empty() {
        return Err(CliError::validation(
            "nothing to load; pass --mentions, --sentiment or --baseline-sentiment",
        ));
    }
    out.summary = Value::Object(summary);
    Ok(out)
}

pub fn contexts_export(store: &Store, copy_to: Option<&Path>) -> CliResult<Outcome> {
    let _lock = store.lock()?;
    let m = store.manifest()?;
    m.require_upstream(Stage::Contexts)?;
    let cleaned = load_cleaned(store, &m)?;
    let records = load_topics(store, &m)?;
    let (mentions, aliases) = load_mention_set(store, &m)?;
    let sets: Vec<BTreeSet<&str>> = base_article_sets(&records).into_iter().map(|(_, s)| s).collect();
    let contexts = export_contexts(
        &mentions,
        &cleaned.bodies,
        &sets,
        m.config.entities.k,
        m.config.entities.context_mode,
        Some(&aliases),
    );
    let mut w = store.begin(Stage::Contexts)?;
    w.put_jsonl("contexts.jsonl", &contexts)?;
    let rec = w.commit(store, "biaslens contexts-export")?;
    if let Some(dest) = copy_to {
        let bytes = store.read_bytes(&rec, "contexts.jsonl")?;
        fs::write(dest, bytes).map_err(|e| CliError::io(dest.display(), e))?;
    }
    Ok(Outcome::new(
        "contexts-export",
        json!({ "contexts": contexts.len(), "copied_to": copy_to.map(|p| p.display().to_string()) }),
    )
    .built(Stage::Contexts, &rec))
}

// ---------------------------------------------------------------------------
// ontology

/// Reply scripts keyed by article id: a string, or an array whose `null`
/// entries simulate transport failures.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum CannedEntry {
    One(String),
    Script(Vec<Option<String>>),
}

#[derive(Debug, Clone, Default)]
pub struct ExtractArgs {
    pub canned: Option<PathBuf>,
    pub articles: Vec<String>,
    pub max_requests: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RawReply {
    article_id: String,
    raw_reply: String,
    attempt_count: u32,
}

pub fn ontology_extract(store: &Store, args: &ExtractArgs) -> CliResult<Outcome> {
    let _lock = store.lock()?;
    let m = store.manifest()?;
    m.require_upstream(Stage::Ontologies)?;
    let cleaned = load_cleaned(store, &m)?;
    let kept: BTreeSet<&str> = cleaned.kept.iter().map(String::as_str).collect();
    let ids: Vec<String> = if args.articles.is_empty() {
        cleaned.kept.clone()
    } else {
        for id in &args.articles {
            if !kept.contains(id.as_str()) {
                return Err(CliError::validation(format!("article {id} is not among the cleaned articles")));
            }
        }
        args.articles.clone()
    };
    let items: Vec<(String, String)> = ids
        .iter()
        .map(|id| {
            let a = cleaned.corpus.article(id).expect("kept articles exist");
            (id.clone(), build_prompt(a, &cleaned.bodies[id]))
        })
        .collect();
    let oc = &m.config.ontology;
    let config = ExtractConfig {
        model: oc.model.clone(),
        temperature: oc.temperature,
        max_retries: oc.max_retries,
        transport_retries: oc.transport_retries,
        max_requests: args.max_requests.or(oc.max_requests),
        parallelism: oc.parallelism,
        ..ExtractConfig::default()
    };
    let mut w = store.begin(Stage::Ontologies)?;
    let (client, sleeper): (Box<dyn LlmClient>, Box<dyn Sleeper>) = match &args.canned {
        Some(p) => {
            let raw = read_file(p)?;
            w.note_input("canned_replies", &raw);
            let entries: BTreeMap<String, CannedEntry> =
                serde_json::from_slice(&raw).map_err(validation("canned reply file"))?;
            let mut llm = CannedLlm::new();
            for (id, prompt) in &items {
                match entries.get(id) {
                    Some(CannedEntry::One(s)) => llm.reply(prompt.clone(), s.clone()),
                    Some(CannedEntry::Script(s)) => llm.script(prompt.clone(), s.clone()),
                    None => {}
                }
            }
            (Box::new(llm), Box::new(RecordingSleeper::default()))
        }
        None => (Box::new(HttpLlm::from_env()?), Box::new(ThreadSleeper)),
    };
    let outcome = extract_batch(&items, client.as_ref(), &config, sleeper.as_ref());
    if !outcome.transport_failures.is_empty() {
        let detail: Vec<String> = outcome
            .transport_failures
            .iter()
            .take(3)
            .map(|(id, e)| format!("{id}: {e}"))
            .collect();
        return Err(CliError::external(format!(
            "LLM transport failed for {} article(s) after retries ({}); nothing was stored",
            outcome.transport_failures.len(),
            detail.join("; ")
        )));
    }
    let raw: Vec<RawReply> = outcome
        .documents
        .iter()
        .map(|d| RawReply {
            article_id: d.article_id.clone(),
            raw_reply: d.raw_reply.clone(),
            attempt_count: d.attempt_count,
        })
        .collect();
    let failed: Vec<&str> = outcome.documents.iter().filter(|d| d.failed).map(|d| d.article_id.as_str()).collect();
    let report = json!({
        "documents": outcome.documents.len(),
        "failed": failed,
        "unprocessed": outcome.unprocessed,
        "budget_exhausted": outcome.budget_exhausted,
        "requests": outcome.requests,
    });
    w.put_jsonl("ontology_raw.jsonl", &raw)?;
    w.put_jsonl("ontology_docs.jsonl", &outcome.documents)?;
    w.put_json("extraction_report.json", &report)?;
    let mut cmd = String::from("biaslens ontology-extract");
    if let Some(p) = &args.canned {
        cmd.push_str(&format!(" --canned {}", shell_arg(&abs(p))));
    }
    for a in &args.articles {
        cmd.push_str(&format!(" --article {}", shell_arg(a)));
    }
    if let Some(n) = args.max_requests {
        cmd.push_str(&format!(" --max-requests {n}"));
    }
    let rec = w.commit(store, &cmd)?;
    let mut out = Outcome::new("ontology-extract", report).built(Stage::Ontologies, &rec);
    if outcome.budget_exhausted {
        out.warnings.push(format!(
            "request budget ran out; {} article(s) left unprocessed",
            outcome.unprocessed.len()
        ));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyFile {
    pub before: ConsistencyReport,
    pub after: ConsistencyReport,
}

pub fn ontology_audit(store: &Store, alias_file: Option<&Path>) -> CliResult<Outcome> {
    let _lock = store.lock()?;
    let m = store.manifest()?;
    m.require_upstream(Stage::Audit)?;
    let cleaned = load_cleaned(store, &m)?;
    let records = load_topics(store, &m)?;
    let docs: Vec<OntologyDocument> = store.read_jsonl(m.require(Stage::Ontologies)?, "ontology_docs.jsonl")?;
    let aliases = match alias_file {
        Some(p) => read_aliases(p)?,
        None => AliasMap::new(),
    };
    let before = check_consistency(&docs);
    let pruned = prune(&docs);
    let after = check_consistency(&pruned);
    let newspaper_of = cleaned.newspaper_of();
    let core = build_graph(&pruned, &newspaper_of, &aliases);

    let mut w = store.begin(Stage::Audit)?;
    w.put_jsonl("ontology_clean.jsonl", &pruned)?;
    w.put_json("consistency_report.json", &ConsistencyFile { before: before.clone(), after: after.clone() })?;
    w.put_bytes("ontology.gexf", gexf_string(&core).as_bytes())?;
    w.put_json("ontology_graph.json", &core)?;
    let mut csv = Vec::new();
    write_edge_csv(&core, &mut csv).map_err(validation("edge csv"))?;
    w.put_bytes("ontology_edges.csv", &csv)?;
    w.put_json("ontology_aliases.json", &aliases)?;
    let by_article: BTreeMap<&str, &OntologyDocument> = pruned.iter().map(|d| (d.article_id.as_str(), d)).collect();
    for r in records.iter().filter(|r| !r.is_noise()) {
        let topic_docs: Vec<OntologyDocument> = r
            .article_ids
            .iter()
            .filter_map(|a| by_article.get(a.as_str()).map(|d| (*d).clone()))
            .collect();
        let g = build_graph(&topic_docs, &newspaper_of, &aliases);
        w.put_json(&format!("ontology/{}.json", r.topic_id), &g)?;
    }
    let cmd = match alias_file {
        Some(p) => format!("biaslens ontology-audit --aliases {}", shell_arg(&abs(p))),
        None => "biaslens ontology-audit".to_string(),
    };
    let rec = w.commit(store, &cmd)?;
    Ok(Outcome::new(
        "ontology-audit",
        json!({
            "before": rates(&before),
            "after": rates(&after),
            "nodes": core.nodes.len(),
            "edges": core.edges.len(),
        }),
    )
    .built(Stage::Audit, &rec))
}

fn rates(r: &ConsistencyReport) -> Value {
    json!({
        "object_class": r.object_class_rate,
        "object_object": r.object_object_rate,
        "object_relation": r.object_relation_rate,
        "objects": r.total_objects,
        "relationships": r.total_relationships,
        "failed_documents": r.failed_documents,
    })
}

// ---------------------------------------------------------------------------
// metrics

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicMetrics {
    pub topic_id: i64,
    pub shares: Vec<TopicShare>,
    pub title_sentiment: Vec<SentimentSummary>,
    pub body_sentiment: Vec<SentimentSummary>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntityRow {
    pub key: EntityKey,
    pub count: usize,
    pub newspapers: usize,
    /// Unweighted mean of the newspapers' mean scores.
    pub mean_simplified: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossTopic {
    pub doc_kind: DocKind,
    pub summaries: Vec<SentimentSummary>,
    pub warnings: Vec<String>,
}

pub fn metrics(store: &Store) -> CliResult<Outcome> {
    let _lock = store.lock()?;
    let m = store.manifest()?;
    m.require_upstream(Stage::Metrics)?;
    let cleaned = load_cleaned(store, &m)?;
    let records = load_topics(store, &m)?;
    let scores = ScoreSet::from_records(store.read_jsonl::<DocumentSentiment>(m.require(Stage::Scores)?, "sentiment.jsonl")?);
    let sc = &m.config.scores;
    let title = scores
        .simplified_by_article(DocKind::Title, sc.title_model.as_deref())
        .map_err(validation("title scores"))?;
    let body = scores
        .simplified_by_article(DocKind::Body, sc.body_model.as_deref())
        .map_err(validation("body scores"))?;
    let entities = if m.stages.contains_key(&Stage::Entities) {
        Some(load_mention_set(store, &m)?)
    } else {
        None
    };
    let entity_sentiment = match m.record(Stage::EntitySentiment) {
        Some(_) => EntitySentimentSet::from_records(
            store.read_jsonl(m.require(Stage::EntitySentiment)?, "entity_sentiment.jsonl")?,
        ),
        None => EntitySentimentSet::default(),
    };
    let by_mention = entity_sentiment
        .by_mention(sc.entity_model.as_deref())
        .map_err(validation("entity scores"))?;

    let newspaper_of = cleaned.newspaper_of();
    let mut totals: BTreeMap<String, usize> = BTreeMap::new();
    let mut clustered: Vec<&String> = Vec::new();
    for r in records.iter().filter(|r| r.level == 0) {
        for a in &r.article_ids {
            *totals.entry(newspaper_of[a].clone()).or_default() += 1;
            clustered.push(a);
        }
    }
    let base_sets = base_article_sets(&records);
    let by_id: BTreeMap<i64, &TopicRecord> = records.iter().map(|r| (r.topic_id, r)).collect();
    let k = m.config.entities.k;
    let mut w = store.begin(Stage::Metrics)?;
    let mut topic_metrics = Vec::new();
    let mut warnings = Vec::new();
    for r in records.iter().filter(|r| !r.is_noise()) {
        let t = r.topic_id;
        let mut counts: BTreeMap<String, usize> = BTreeMap::new();
        for a in &r.article_ids {
            *counts.entry(newspaper_of[a].clone()).or_default() += 1;
        }
        let shares = match rate_deviation(t, &counts, &totals, m.config.metrics.mean_set) {
            Ok(s) => s,
            Err(e) => {
                warnings.push(format!("topic {t}: {e}"));
                continue;
            }
        };
        let mut tw = Vec::new();
        let mut sentiment = BTreeMap::new();
        for (kind, scores) in [(DocKind::Title, &title), (DocKind::Body, &body)] {
            let (means, w2) = newspaper_mean_sentiment(&r.article_ids, &newspaper_of, scores);
            tw.extend(w2);
            sentiment.insert(kind, sentiment_deviation(&means, Scope::Topic(t), Subject::Document(kind)));
        }
        let mut maps: Vec<MapData> = Vec::new();
        for kind in DocKind::ALL {
            let spectrum: Spectrum = article_spectrum(t, &shares, &sentiment[&kind], kind);
            w.put_json(&format!("spectrum/{t}/{kind}.json"), &spectrum)?;
            maps.push(map_points(t, kind, &shares, &sentiment[&kind], cleaned.corpus.newspapers()));
        }
        w.put_json(&format!("map/{t}.json"), &maps)?;

        let mut entity_spectra: Vec<Spectrum> = Vec::new();
        let mut table: Vec<EntityRow> = Vec::new();
        if let Some((mentions, aliases)) = &entities {
            let articles: BTreeSet<&str> = r.article_ids.iter().map(String::as_str).collect();
            let analyzed: Vec<EntityCount> = if r.level == 0 {
                top_entities(mentions, &articles, k, Some(aliases))
            } else {
                let leaves: BTreeSet<i64> = descendants(&by_id, t);
                let sets: Vec<BTreeSet<&str>> = base_sets
                    .iter()
                    .filter(|(id, _)| leaves.contains(id))
                    .map(|(_, s)| s.clone())
                    .collect();
                analyzed_entities(mentions, &sets, k, Some(aliases))
            };
            for e in analyzed {
                let stats =
                    entity_newspaper_stats(mentions, &by_mention, &articles, &newspaper_of, &e.key, Some(aliases));
                let means: Vec<f64> = stats.values().filter_map(|s| s.mean_simplified).collect();
                table.push(EntityRow {
                    key: e.key.clone(),
                    count: e.count,
                    newspapers: stats.len(),
                    mean_simplified: (!means.is_empty()).then(|| means.iter().sum::<f64>() / means.len() as f64),
                });
                entity_spectra.push(entity_spectrum(t, &e.key, &stats));
            }
        }
        w.put_json(&format!("spectrum/{t}/entity.json"), &entity_spectra)?;
        w.put_json(&format!("entities/{t}.json"), &table)?;
        topic_metrics.push(TopicMetrics {
            topic_id: t,
            shares,
            title_sentiment: sentiment.remove(&DocKind::Title).unwrap_or_default(),
            body_sentiment: sentiment.remove(&DocKind::Body).unwrap_or_default(),
            warnings: tw,
        });
    }
    let non_noise: Vec<String> = records
        .iter()
        .filter(|r| r.level == 0 && !r.is_noise())
        .flat_map(|r| r.article_ids.iter().cloned())
        .collect();
    let cross: Vec<CrossTopic> = [(DocKind::Title, &title), (DocKind::Body, &body)]
        .into_iter()
        .map(|(kind, scores)| {
            let (summaries, warnings) = cross_topic_sentiment(&non_noise, &newspaper_of, scores, kind);
            CrossTopic {
                doc_kind: kind,
                summaries,
                warnings,
            }
        })
        .collect();
    w.put_json("cross_topic.json", &cross)?;
    w.put_json(
        "metrics.json",
        &json!({
            "mean_set": m.config.metrics.mean_set,
            "totals": totals,
            "clustered_articles": clustered.len(),
            "topics": topic_metrics,
        }),
    )?;
    let rec = w.commit(store, "biaslens metrics")?;
    let mut out = Outcome::new(
        "metrics",
        json!({
            "topics": topic_metrics.len(),
            "newspapers": totals.len(),
            "entities": entities.is_some(),
            "entity_scores": !entity_sentiment.is_empty(),
        }),
    )
    .built(Stage::Metrics, &rec);
    out.warnings = warnings;
    Ok(out)
}

fn descendants(by_id: &BTreeMap<i64, &TopicRecord>, id: i64) -> BTreeSet<i64> {
    let mut out = BTreeSet::new();
    let mut stack = vec![id];
    while let Some(x) = stack.pop() {
        let Some(r) = by_id.get(&x) else { continue };
        if r.children.is_empty() {
            out.insert(x);
        } else {
            stack.extend(&r.children);
        }
    }
    out
}

// ---------------------------------------------------------------------------
// export

pub fn export(store: &Store, dest: &Path, graph: Option<(i64, biaslens_core::ontology::GraphFilter)>) -> CliResult<Outcome> {
    let m = store.manifest()?;
    let mut files = Vec::new();
    let mut skipped = Vec::new();
    for stage in Stage::ALL {
        let Some(rec) = m.record(stage) else { continue };
        if m.require(stage).is_err() {
            skipped.push(stage);
            continue;
        }
        for rel in rec.artifacts.keys() {
            let bytes = store.read_bytes(rec, rel)?;
            let path = dest.join(rel);
            if let Some(parent) = path.parent() {
                fs::create_dir_all(parent).map_err(|e| CliError::io(parent.display(), e))?;
            }
            fs::write(&path, bytes).map_err(|e| CliError::io(path.display(), e))?;
            files.push(rel.clone());
        }
    }
    if let Some((topic, filter)) = graph {
        let g: OntologyGraph = crate::api::ontology_view(store, &m, topic, &filter).map_err(|e| e.into_cli())?;
        let stem = format!("ontology_{topic}");
        let mut csv = Vec::new();
        write_edge_csv(&g, &mut csv).map_err(validation("edge csv"))?;
        for (name, bytes) in [
            (format!("{stem}.gexf"), gexf_string(&g).into_bytes()),
            (format!("{stem}_edges.csv"), csv),
            (format!("{stem}.json"), serde_json::to_vec_pretty(&g).expect("graph")),
        ] {
            let path = dest.join(&name);
            fs::create_dir_all(dest).map_err(|e| CliError::io(dest.display(), e))?;
            fs::write(&path, bytes).map_err(|e| CliError::io(path.display(), e))?;
            files.push(name);
        }
    }
    let mut out = Outcome::new(
        "export",
        json!({ "out": dest.display().to_string(), "files": files.len(), "skipped_stale": skipped }),
    );
    out.warnings
        .extend(skipped.iter().map(|s| format!("stage {s} is stale and was not exported")));
    Ok(out)
}
