//! The bundled demo project under `demo/`.

use std::path::{Path, PathBuf};

use crate::error::CliResult;
use crate::pipeline::{self, EntitiesArgs, ExtractArgs, IngestArgs};
use crate::store::Store;

pub fn demo_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("demo")
}

/// Config overrides the demo is built with.
pub fn demo_settings() -> Vec<(String, String)> {
    vec![("clustering.min_cluster_size".into(), "5".into())]
}

/// Run every stage of the demo project into `root`.
pub fn build_demo(root: &Path) -> CliResult<Store> {
    let d = demo_dir();
    pipeline::init(root, "demo", &demo_settings(), true)?;
    let store = Store::open(root)?;
    pipeline::ingest(
        &store,
        &IngestArgs {
            articles: Some(d.join("articles.jsonl")),
            newspapers: Some(d.join("newspapers.json")),
            embeddings: Some(d.join("embeddings.jsonl")),
            embeddings_bin: None,
        },
    )?;
    pipeline::clean(&store, Some(&d.join("noise_rules.json")))?;
    pipeline::cluster(&store)?;
    pipeline::topics(&store)?;
    pipeline::score_load(&store, None, true)?;
    pipeline::entities_load(
        &store,
        &EntitiesArgs {
            mentions: Some(d.join("entities.jsonl")),
            ..EntitiesArgs::default()
        },
    )?;
    pipeline::contexts_export(&store, None)?;
    pipeline::entities_load(
        &store,
        &EntitiesArgs {
            baseline_sentiment: true,
            ..EntitiesArgs::default()
        },
    )?;
    pipeline::ontology_extract(
        &store,
        &ExtractArgs {
            canned: Some(d.join("ontology_replies.json")),
            articles: Vec::new(),
            max_requests: None,
        },
    )?;
    pipeline::ontology_audit(&store, Some(&d.join("aliases.json")))?;
    pipeline::metrics(&store)?;
    Ok(store)
}
