//! Project store: a directory of versioned stage outputs plus a manifest.
//!
//! Layout:
//!
//! ```text
//! <project>/biaslens.json            manifest (config + one record per stage)
//! <project>/stages/<stage>/<hash16>/ immutable stage outputs
//! <project>/staging/                 outputs being written
//! ```
//!
//! A stage hash covers the stage name, the config values it reads, the
//! hashes of its upstream stages and the hashes of its own files. Stage
//! directories are never modified once written, so a reader holding one
//! manifest sees a consistent snapshot while the CLI swaps in a new one.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};

use biaslens_core::digest::{sha256_hex, sha256_parts, to_rounded_json};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::ProjectConfig;
use crate::error::{CliError, CliResult, ErrorKind};

pub const MANIFEST_FILE: &str = "biaslens.json";
pub const FORMAT_VERSION: u32 = 1;
const LOCK_FILE: &str = ".lock";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Corpus,
    Embeddings,
    Clean,
    Clusters,
    Topics,
    Scores,
    Entities,
    Contexts,
    EntitySentiment,
    Ontologies,
    Audit,
    Metrics,
}

impl Stage {
    /// Every stage, upstream before downstream.
    pub const ALL: [Stage; 12] = [
        Stage::Corpus,
        Stage::Embeddings,
        Stage::Clean,
        Stage::Clusters,
        Stage::Topics,
        Stage::Scores,
        Stage::Entities,
        Stage::Contexts,
        Stage::EntitySentiment,
        Stage::Ontologies,
        Stage::Audit,
        Stage::Metrics,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Corpus => "corpus",
            Stage::Embeddings => "embeddings",
            Stage::Clean => "clean",
            Stage::Clusters => "clusters",
            Stage::Topics => "topics",
            Stage::Scores => "scores",
            Stage::Entities => "entities",
            Stage::Contexts => "contexts",
            Stage::EntitySentiment => "entity_sentiment",
            Stage::Ontologies => "ontologies",
            Stage::Audit => "audit",
            Stage::Metrics => "metrics",
        }
    }

    pub fn parse(s: &str) -> Option<Stage> {
        Stage::ALL.into_iter().find(|st| st.name() == s)
    }

    pub fn requires(self) -> &'static [Stage] {
        match self {
            Stage::Corpus => &[],
            Stage::Embeddings | Stage::Clean => &[Stage::Corpus],
            Stage::Clusters => &[Stage::Clean, Stage::Embeddings],
            Stage::Topics => &[Stage::Clusters, Stage::Clean],
            Stage::Scores | Stage::Entities | Stage::Ontologies => &[Stage::Clean],
            Stage::Contexts => &[Stage::Entities, Stage::Topics, Stage::Clean],
            Stage::EntitySentiment => &[Stage::Entities],
            Stage::Audit => &[Stage::Ontologies, Stage::Topics, Stage::Clean],
            Stage::Metrics => &[Stage::Topics, Stage::Scores, Stage::Clean],
        }
    }

    /// Upstreams used when present. A stage built without one goes stale
    /// once it appears.
    pub fn optional(self) -> &'static [Stage] {
        match self {
            Stage::EntitySentiment => &[Stage::Contexts],
            Stage::Metrics => &[Stage::Entities, Stage::EntitySentiment],
            _ => &[],
        }
    }

    pub fn config_keys(self) -> &'static [&'static str] {
        match self {
            Stage::Clean => &["language.keep"],
            Stage::Clusters => &[
                "clustering.reduce_dim",
                "clustering.min_cluster_size",
                "clustering.min_samples",
                "clustering.allow_single_cluster",
                "quality.noise",
                "quality.dominance",
            ],
            Stage::Topics => &[
                "topics.top_n_terms",
                "topics.name_terms",
                "topics.merge_single_source",
                "quality.dominance",
            ],
            Stage::Contexts => &["entities.k", "entities.context_mode"],
            Stage::Ontologies => &["ontology.model", "ontology.temperature", "ontology.max_retries"],
            Stage::Metrics => &[
                "metrics.mean_set",
                "entities.k",
                "scores.title_model",
                "scores.body_model",
                "scores.entity_model",
            ],
            _ => &[],
        }
    }

    /// Default command that (re)builds the stage.
    pub fn default_command(self) -> &'static str {
        match self {
            Stage::Corpus => "biaslens ingest --articles <articles.jsonl> --newspapers <newspapers.json>",
            Stage::Embeddings => "biaslens ingest --embeddings <embeddings.jsonl>",
            Stage::Clean => "biaslens clean",
            Stage::Clusters => "biaslens cluster",
            Stage::Topics => "biaslens topics",
            Stage::Scores => "biaslens score-load --baseline",
            Stage::Entities => "biaslens entities-load --mentions <entities.jsonl>",
            Stage::Contexts => "biaslens contexts-export",
            Stage::EntitySentiment => "biaslens entities-load --baseline-sentiment",
            Stage::Ontologies => "biaslens ontology-extract",
            Stage::Audit => "biaslens ontology-audit",
            Stage::Metrics => "biaslens metrics",
        }
    }
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub hash: String,
    /// Output directory relative to the project root.
    pub dir: String,
    /// Upstream stage hashes this output was built from.
    pub upstream: BTreeMap<Stage, String>,
    /// Config values read while building.
    pub config: BTreeMap<String, Value>,
    /// Content hashes of external input files (informational).
    pub inputs: BTreeMap<String, String>,
    /// Relative path → SHA-256 of every file in `dir`.
    pub artifacts: BTreeMap<String, String>,
    /// Command line that built the stage.
    pub command: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub name: String,
    pub config: ProjectConfig,
    pub stages: BTreeMap<Stage, StageRecord>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case", tag = "status", content = "reason")]
pub enum StageStatus {
    Missing,
    Fresh,
    Stale(String),
}

impl Manifest {
    pub fn new(name: &str, config: ProjectConfig) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            name: name.to_string(),
            config,
            stages: BTreeMap::new(),
        }
    }

    pub fn record(&self, stage: Stage) -> Option<&StageRecord> {
        self.stages.get(&stage)
    }

    pub fn status(&self, stage: Stage) -> StageStatus {
        let Some(rec) = self.stages.get(&stage) else {
            return StageStatus::Missing;
        };
        if rec.config != self.config.slice(stage.config_keys()) {
            let changed = stage
                .config_keys()
                .iter()
                .find(|k| rec.config.get(**k) != self.config.get(k).ok().as_ref())
                .copied()
                .unwrap_or("?");
            return StageStatus::Stale(format!("config key {changed} changed"));
        }
        for &up in stage.requires() {
            match self.stages.get(&up) {
                None => return StageStatus::Stale(format!("upstream {up} is gone")),
                Some(u) if rec.upstream.get(&up) != Some(&u.hash) => {
                    return StageStatus::Stale(format!("upstream {up} was rebuilt"))
                }
                _ => {}
            }
        }
        for &up in stage.optional() {
            let now = self.stages.get(&up).map(|u| &u.hash);
            if rec.upstream.get(&up) != now {
                return StageStatus::Stale(format!("optional upstream {up} changed"));
            }
        }
        for &up in rec.upstream.keys() {
            if let StageStatus::Stale(_) | StageStatus::Missing = self.status(up) {
                return StageStatus::Stale(format!("upstream {up} is stale"));
            }
        }
        StageStatus::Fresh
    }

    pub fn stale_stages(&self) -> BTreeSet<Stage> {
        Stage::ALL
            .into_iter()
            .filter(|&s| matches!(self.status(s), StageStatus::Stale(_)))
            .collect()
    }

    /// Stages to rebuild, in order, before `stage` is fresh.
    pub fn rebuild_plan(&self, stage: Stage) -> Vec<Stage> {
        fn visit(m: &Manifest, s: Stage, out: &mut Vec<Stage>) {
            if m.status(s) == StageStatus::Fresh || out.contains(&s) {
                return;
            }
            for &up in s.requires() {
                visit(m, up, out);
            }
            for &up in s.optional() {
                if m.stages.contains_key(&up) {
                    visit(m, up, out);
                }
            }
            out.push(s);
        }
        let mut out = Vec::new();
        visit(self, stage, &mut out);
        out
    }

    pub fn rebuild_command(&self, stage: Stage) -> String {
        self.rebuild_plan(stage)
            .into_iter()
            .map(|s| match self.stages.get(&s) {
                Some(r) if !r.command.is_empty() => r.command.clone(),
                _ => s.default_command().to_string(),
            })
            .collect::<Vec<_>>()
            .join(" && ")
    }

    /// The fresh record of `stage`, or the error naming the rebuild command.
    pub fn require(&self, stage: Stage) -> CliResult<&StageRecord> {
        match self.status(stage) {
            StageStatus::Fresh => Ok(&self.stages[&stage]),
            StageStatus::Missing => Err(CliError::missing(
                format!("stage {stage} has not been built"),
                self.rebuild_command(stage),
            )),
            StageStatus::Stale(reason) => Err(CliError::stale(
                format!("stage {stage} is stale ({reason})"),
                self.rebuild_command(stage),
            )),
        }
    }

    /// Check every required upstream of `stage` before building it. The
    /// rebuild hint covers the whole plan up to and including `stage`.
    pub fn require_upstream(&self, stage: Stage) -> CliResult<()> {
        let optional = stage.optional().iter().filter(|up| self.stages.contains_key(up));
        for &up in stage.requires().iter().chain(optional) {
            if let Err(mut e) = self.require(up) {
                e.rebuild = Some(self.rebuild_command(stage));
                return Err(e);
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Store {
    root: PathBuf,
}

/// Removes the write lock on drop.
#[derive(Debug)]
pub struct WriteLock {
    path: PathBuf,
}

impl Drop for WriteLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

impl Store {
    pub fn init(root: impl Into<PathBuf>, name: &str, config: ProjectConfig, force: bool) -> CliResult<Store> {
        let root = root.into();
        config.validate()?;
        fs::create_dir_all(&root).map_err(|e| CliError::io(root.display(), e))?;
        let store = Store { root };
        if store.manifest_path().exists() && !force {
            return Err(CliError::validation(format!(
                "{} already holds a project; pass --force to reset it",
                store.root.display()
            )));
        }
        store.save_manifest(&Manifest::new(name, config))?;
        Ok(store)
    }

    pub fn open(root: impl Into<PathBuf>) -> CliResult<Store> {
        let store = Store { root: root.into() };
        if !store.manifest_path().exists() {
            return Err(CliError::missing(
                format!("{} is not a biaslens project", store.root.display()),
                "biaslens init --name <name>",
            ));
        }
        Ok(store)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn manifest_path(&self) -> PathBuf {
        self.root.join(MANIFEST_FILE)
    }

    pub fn manifest(&self) -> CliResult<Manifest> {
        let path = self.manifest_path();
        let bytes = fs::read(&path).map_err(|e| CliError::io(path.display(), e))?;
        let m: Manifest = serde_json::from_slice(&bytes)
            .map_err(|e| CliError::validation(format!("manifest {} is corrupt: {e}", path.display())))?;
        if m.format_version != FORMAT_VERSION {
            return Err(CliError::validation(format!(
                "manifest format {} is not supported (expected {FORMAT_VERSION})",
                m.format_version
            )));
        }
        Ok(m)
    }

    /// Write the manifest through a temporary file and an atomic rename.
    pub fn save_manifest(&self, m: &Manifest) -> CliResult<()> {
        let mut bytes = serde_json::to_vec_pretty(m).expect("manifest serializes");
        bytes.push(b'\n');
        atomic_write(&self.manifest_path(), &bytes)
    }

    pub fn lock(&self) -> CliResult<WriteLock> {
        let path = self.root.join(LOCK_FILE);
        match fs::OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut f) => {
                let _ = writeln!(f, "{}", std::process::id());
                Ok(WriteLock { path })
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(CliError::validation(format!(
                "another command is writing this project; remove {} if that is not so",
                path.display()
            ))),
            Err(e) => Err(CliError::io(path.display(), e)),
        }
    }

    pub fn stage_dir(&self, rec: &StageRecord) -> PathBuf {
        self.root.join(&rec.dir)
    }

    /// Read a stage file and verify it against the recorded hash.
    pub fn read_bytes(&self, rec: &StageRecord, rel: &str) -> CliResult<Vec<u8>> {
        let Some(expected) = rec.artifacts.get(rel) else {
            return Err(CliError::validation(format!("{} has no file {rel}", rec.dir)));
        };
        let path = self.stage_dir(rec).join(rel);
        let bytes = fs::read(&path).map_err(|e| CliError::io(path.display(), e))?;
        if &sha256_hex(&bytes) != expected {
            return Err(CliError::validation(format!("{} does not match its recorded hash", path.display())));
        }
        Ok(bytes)
    }

    pub fn read_json<T: DeserializeOwned>(&self, rec: &StageRecord, rel: &str) -> CliResult<T> {
        let bytes = self.read_bytes(rec, rel)?;
        serde_json::from_slice(&bytes).map_err(|e| CliError::validation(format!("{}/{rel}: {e}", rec.dir)))
    }

    pub fn read_jsonl<T: DeserializeOwned>(&self, rec: &StageRecord, rel: &str) -> CliResult<Vec<T>> {
        let bytes = self.read_bytes(rec, rel)?;
        let text = String::from_utf8(bytes).map_err(|_| CliError::validation(format!("{rel} is not UTF-8")))?;
        text.lines()
            .filter(|l| !l.trim().is_empty())
            .enumerate()
            .map(|(i, l)| {
                serde_json::from_str(l)
                    .map_err(|e| CliError::validation(format!("{}/{rel} line {}: {e}", rec.dir, i + 1)))
            })
            .collect()
    }

    pub fn begin(&self, stage: Stage) -> CliResult<StageWriter> {
        static SEQ: AtomicUsize = AtomicUsize::new(0);
        let staging = self.root.join("staging").join(format!(
            "{}-{}-{}",
            stage.name(),
            std::process::id(),
            SEQ.fetch_add(1, Ordering::SeqCst)
        ));
        if staging.exists() {
            fs::remove_dir_all(&staging).map_err(|e| CliError::io(staging.display(), e))?;
        }
        fs::create_dir_all(&staging).map_err(|e| CliError::io(staging.display(), e))?;
        Ok(StageWriter {
            stage,
            staging,
            artifacts: BTreeMap::new(),
            inputs: BTreeMap::new(),
        })
    }
}

fn atomic_write(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let tmp = path.with_extension("json.tmp");
    let run = || -> std::io::Result<()> {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    };
    run().map_err(|e| CliError::io(path.display(), e))
}

/// Collects a stage's files in a private staging directory until commit.
#[derive(Debug)]
pub struct StageWriter {
    stage: Stage,
    staging: PathBuf,
    artifacts: BTreeMap<String, String>,
    inputs: BTreeMap<String, String>,
}

impl StageWriter {
    pub fn stage(&self) -> Stage {
        self.stage
    }

    pub fn put_bytes(&mut self, rel: &str, bytes: &[u8]) -> CliResult<()> {
        let path = self.staging.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| CliError::io(parent.display(), e))?;
        }
        fs::write(&path, bytes).map_err(|e| CliError::io(path.display(), e))?;
        self.artifacts.insert(rel.to_string(), sha256_hex(bytes));
        Ok(())
    }

    /// Pretty JSON with every real rounded to six decimals.
    pub fn put_json<T: Serialize>(&mut self, rel: &str, value: &T) -> CliResult<()> {
        let mut bytes = serde_json::to_vec_pretty(&to_rounded_json(value)).expect("serializable");
        bytes.push(b'\n');
        self.put_bytes(rel, &bytes)
    }

    /// One compact JSON object per line. Reals are kept at full precision so
    /// that records reload exactly.
    pub fn put_jsonl<T: Serialize>(&mut self, rel: &str, items: impl IntoIterator<Item = T>) -> CliResult<()> {
        let mut bytes = Vec::new();
        for item in items {
            serde_json::to_writer(&mut bytes, &item).expect("serializable");
            bytes.push(b'\n');
        }
        self.put_bytes(rel, &bytes)
    }

    pub fn note_input(&mut self, name: &str, bytes: &[u8]) {
        self.inputs.insert(name.to_string(), sha256_hex(bytes));
    }

    pub fn hash(&self, upstream: &BTreeMap<Stage, String>, config: &BTreeMap<String, Value>) -> String {
        let config = serde_json::to_vec(config).expect("serializable");
        let upstream = serde_json::to_vec(upstream).expect("serializable");
        let artifacts = serde_json::to_vec(&self.artifacts).expect("serializable");
        sha256_parts([
            ("stage", self.stage.name().as_bytes()),
            ("config", config.as_slice()),
            ("upstream", upstream.as_slice()),
            ("artifacts", artifacts.as_slice()),
        ])
    }

    /// Move the files into their versioned directory and swap the manifest.
    /// The caller must hold the write lock.
    pub fn commit(self, store: &Store, command: &str) -> CliResult<StageRecord> {
        let mut manifest = store.manifest()?;
        let stage = self.stage;
        let mut upstream = BTreeMap::new();
        for &up in stage.requires().iter().chain(stage.optional()) {
            if let Some(r) = manifest.stages.get(&up) {
                upstream.insert(up, r.hash.clone());
            } else if stage.requires().contains(&up) {
                return Err(CliError {
                    kind: ErrorKind::Missing,
                    message: format!("stage {up} disappeared while building {stage}"),
                    rebuild: Some(up.default_command().into()),
                });
            }
        }
        let config = manifest.config.slice(stage.config_keys());
        let hash = self.hash(&upstream, &config);
        let dir = format!("stages/{}/{}", stage.name(), &hash[..16]);
        let target = store.root.join(&dir);
        if target.exists() {
            // same hash, same bytes
            fs::remove_dir_all(&self.staging).map_err(|e| CliError::io(self.staging.display(), e))?;
        } else {
            let parent = target.parent().expect("stage dirs have parents");
            fs::create_dir_all(parent).map_err(|e| CliError::io(parent.display(), e))?;
            fs::rename(&self.staging, &target).map_err(|e| CliError::io(target.display(), e))?;
        }
        let record = StageRecord {
            hash,
            dir,
            upstream,
            config,
            inputs: self.inputs,
            artifacts: self.artifacts,
            command: command.to_string(),
        };
        let previous = manifest.stages.insert(stage, record.clone());
        store.save_manifest(&manifest)?;
        // keep the replaced version for readers that still hold the old manifest
        let keep: BTreeSet<String> = [Some(record.dir.clone()), previous.map(|p| p.dir)].into_iter().flatten().collect();
        if let Ok(entries) = fs::read_dir(store.root.join("stages").join(stage.name())) {
            for e in entries.flatten() {
                let rel = format!("stages/{}/{}", stage.name(), e.file_name().to_string_lossy());
                if !keep.contains(&rel) {
                    let _ = fs::remove_dir_all(e.path());
                }
            }
        }
        let _ = fs::remove_dir(store.root.join("staging"));
        Ok(record)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn store() -> (tempfile::TempDir, Store) {
        let dir = tempfile::tempdir().unwrap();
        let s = Store::init(dir.path(), "t", ProjectConfig::default(), false).unwrap();
        (dir, s)
    }

    fn build(s: &Store, stage: Stage, content: &str) -> StageRecord {
        let _lock = s.lock().unwrap();
        let mut w = s.begin(stage).unwrap();
        w.put_bytes("out.txt", content.as_bytes()).unwrap();
        w.commit(s, stage.default_command()).unwrap()
    }

    #[test]
    fn missing_upstream_names_the_whole_chain() {
        let (_d, s) = store();
        let m = s.manifest().unwrap();
        let err = m.require(Stage::Metrics).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        let cmd = err.rebuild.unwrap();
        assert!(cmd.starts_with("biaslens ingest"), "{cmd}");
        assert!(cmd.ends_with("biaslens metrics"), "{cmd}");
    }

    #[test]
    fn rebuilding_upstream_makes_downstream_stale() {
        let (_d, s) = store();
        build(&s, Stage::Corpus, "a");
        let clean = build(&s, Stage::Clean, "b");
        assert_eq!(s.manifest().unwrap().status(Stage::Clean), StageStatus::Fresh);
        assert_eq!(s.read_bytes(&clean, "out.txt").unwrap(), b"b");

        build(&s, Stage::Corpus, "a");
        assert_eq!(s.manifest().unwrap().status(Stage::Clean), StageStatus::Fresh, "same content, same hash");

        build(&s, Stage::Corpus, "changed");
        let m = s.manifest().unwrap();
        assert!(matches!(m.status(Stage::Clean), StageStatus::Stale(_)));
        let err = m.require(Stage::Clean).unwrap_err();
        assert_eq!(err.rebuild.as_deref(), Some("biaslens clean"));
    }

    #[test]
    fn config_change_stales_readers() {
        let (_d, s) = store();
        build(&s, Stage::Corpus, "a");
        build(&s, Stage::Clean, "b");
        let mut m = s.manifest().unwrap();
        m.config.set("language.keep", "de").unwrap();
        s.save_manifest(&m).unwrap();
        let m = s.manifest().unwrap();
        assert_eq!(m.status(Stage::Clean), StageStatus::Stale("config key language.keep changed".into()));
        assert_eq!(m.status(Stage::Corpus), StageStatus::Fresh);
    }

    #[test]
    fn tampered_files_are_detected() {
        let (_d, s) = store();
        let rec = build(&s, Stage::Corpus, "a");
        fs::write(s.stage_dir(&rec).join("out.txt"), "x").unwrap();
        assert!(s.read_bytes(&rec, "out.txt").is_err());
    }

    #[test]
    fn lock_is_exclusive() {
        let (_d, s) = store();
        let g = s.lock().unwrap();
        assert!(s.lock().is_err());
        drop(g);
        s.lock().unwrap();
    }

    #[test]
    fn old_versions_are_collected() {
        let (_d, s) = store();
        build(&s, Stage::Corpus, "1");
        build(&s, Stage::Corpus, "2");
        build(&s, Stage::Corpus, "3");
        let n = fs::read_dir(s.root().join("stages/corpus")).unwrap().count();
        assert_eq!(n, 2);
    }

    #[test]
    fn init_refuses_to_overwrite() {
        let (d, _s) = store();
        assert!(Store::init(d.path(), "t", ProjectConfig::default(), false).is_err());
        Store::init(d.path(), "t", ProjectConfig::default(), true).unwrap();
        assert_eq!(Store::open(d.path().join("nope")).unwrap_err().exit_code(), 2);
    }
}
