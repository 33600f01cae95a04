//! Command-line interface.

use std::net::SocketAddr;
use std::path::PathBuf;

use biaslens_core::ontology::GraphFilter;
use clap::{Parser, Subcommand};
use serde_json::Value;

use crate::error::{CliError, CliResult};
use crate::pipeline::{self, EntitiesArgs, ExtractArgs, IngestArgs, Outcome};
use crate::store::Store;

#[derive(Debug, Parser)]
#[command(name = "biaslens", version, about = "Media-bias analysis pipeline and read-only API")]
pub struct Cli {
    /// Project directory.
    #[arg(long, global = true, env = "BIASLENS_PROJECT", default_value = ".")]
    pub project: PathBuf,
    /// Print machine-readable JSON instead of text.
    #[arg(long, global = true)]
    pub json: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Create a project with the default configuration.
    Init {
        #[arg(long)]
        name: String,
        /// Override a config value, e.g. `--set clustering.min_cluster_size=5`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        /// Reset an existing project.
        #[arg(long)]
        force: bool,
    },
    /// Read or change configuration values.
    Config {
        #[command(subcommand)]
        action: ConfigAction,
    },
    /// Show every stage with its state and hash.
    Status,
    /// Load the corpus and/or the document embeddings.
    Ingest {
        #[arg(long)]
        articles: Option<PathBuf>,
        #[arg(long)]
        newspapers: Option<PathBuf>,
        /// `embeddings.jsonl` with `{article_id, vector}` lines.
        #[arg(long)]
        embeddings: Option<PathBuf>,
        /// JSON manifest of the binary float32 embedding variant.
        #[arg(long)]
        embeddings_bin: Option<PathBuf>,
    },
    /// Filter languages and apply newspaper noise rules.
    Clean {
        #[arg(long)]
        noise_rules: Option<PathBuf>,
    },
    /// Cluster the embeddings of the cleaned articles.
    Cluster,
    /// Build the topic hierarchy from the clusters.
    Topics,
    /// Load title/body sentiment scores or compute the lexicon baseline.
    ScoreLoad {
        /// `sentiment.jsonl` produced by a model adapter.
        #[arg(long)]
        file: Option<PathBuf>,
        #[arg(long)]
        baseline: bool,
    },
    /// Load entity mentions and/or target sentiment.
    EntitiesLoad {
        #[arg(long)]
        mentions: Option<PathBuf>,
        /// JSON object of surface rewrites applied before keying.
        #[arg(long)]
        aliases: Option<PathBuf>,
        /// `entity_sentiment.jsonl` produced by a model adapter.
        #[arg(long)]
        sentiment: Option<PathBuf>,
        /// Score exported contexts with the lexicon baseline.
        #[arg(long)]
        baseline_sentiment: bool,
    },
    /// Build left/target/right contexts for the top entities of every topic.
    ContextsExport {
        /// Also copy `contexts.jsonl` here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Ask the LLM for one ontology per cleaned article.
    OntologyExtract {
        /// JSON object of canned replies by article id instead of the HTTP endpoint.
        #[arg(long)]
        canned: Option<PathBuf>,
        /// Only these articles (repeatable).
        #[arg(long = "article")]
        articles: Vec<String>,
        #[arg(long)]
        max_requests: Option<usize>,
    },
    /// Audit and prune the extracted ontologies and build the graphs.
    OntologyAudit {
        #[arg(long)]
        aliases: Option<PathBuf>,
    },
    /// Compute rate and sentiment deviations, spectra and map data.
    Metrics,
    /// Print a stored media bias spectrum.
    Spectrum {
        #[arg(long)]
        topic: i64,
        #[arg(long, default_value = "title")]
        mode: String,
        /// Entity key `surface/GROUP` (entity mode).
        #[arg(long)]
        entity: Option<String>,
    },
    /// Print stored map markers for a topic.
    Map {
        #[arg(long)]
        topic: i64,
    },
    /// Copy every fresh artifact into a directory, optionally with a filtered ontology.
    Export {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        topic: Option<i64>,
        #[arg(long, requires = "topic")]
        newspaper: Option<String>,
        #[arg(long, requires = "topic")]
        article: Option<String>,
    },
    /// Serve the read-only HTTP API.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
    },
}

#[derive(Debug, Subcommand)]
pub enum ConfigAction {
    /// Print one value, or the whole configuration.
    Get { key: Option<String> },
    /// Set a value; prints the stages the change invalidated.
    Set { key: String, value: String },
}

fn read_only(command: &str, body: Value) -> Outcome {
    Outcome::new(command, body)
}

pub fn run(cli: Cli) -> CliResult<Outcome> {
    let root = cli.project;
    match cli.command {
        Command::Init { name, set, force } => {
            let pairs = set
                .iter()
                .map(|s| {
                    s.split_once('=')
                        .map(|(k, v)| (k.to_string(), v.to_string()))
                        .ok_or_else(|| CliError::validation(format!("--set expects KEY=VALUE, got {s:?}")))
                })
                .collect::<CliResult<Vec<_>>>()?;
            pipeline::init(&root, &name, &pairs, force)
        }
        Command::Config { action } => {
            let store = Store::open(&root)?;
            match action {
                ConfigAction::Get { key } => pipeline::config_get(&store, key.as_deref()),
                ConfigAction::Set { key, value } => pipeline::config_set(&store, &key, &value),
            }
        }
        Command::Status => pipeline::status(&Store::open(&root)?),
        Command::Ingest {
            articles,
            newspapers,
            embeddings,
            embeddings_bin,
        } => pipeline::ingest(
            &Store::open(&root)?,
            &IngestArgs {
                articles,
                newspapers,
                embeddings,
                embeddings_bin,
            },
        ),
        Command::Clean { noise_rules } => pipeline::clean(&Store::open(&root)?, noise_rules.as_deref()),
        Command::Cluster => pipeline::cluster(&Store::open(&root)?),
        Command::Topics => pipeline::topics(&Store::open(&root)?),
        Command::ScoreLoad { file, baseline } => pipeline::score_load(&Store::open(&root)?, file.as_deref(), baseline),
        Command::EntitiesLoad {
            mentions,
            aliases,
            sentiment,
            baseline_sentiment,
        } => pipeline::entities_load(
            &Store::open(&root)?,
            &EntitiesArgs {
                mentions,
                aliases,
                sentiment,
                baseline_sentiment,
            },
        ),
        Command::ContextsExport { out } => pipeline::contexts_export(&Store::open(&root)?, out.as_deref()),
        Command::OntologyExtract {
            canned,
            articles,
            max_requests,
        } => pipeline::ontology_extract(
            &Store::open(&root)?,
            &ExtractArgs {
                canned,
                articles,
                max_requests,
            },
        ),
        Command::OntologyAudit { aliases } => pipeline::ontology_audit(&Store::open(&root)?, aliases.as_deref()),
        Command::Metrics => pipeline::metrics(&Store::open(&root)?),
        Command::Spectrum { topic, mode, entity } => {
            let store = Store::open(&root)?;
            let m = store.manifest()?;
            let p = crate::api::spectrum(&store, &m, topic, &mode, entity.as_deref()).map_err(|e| e.into_cli())?;
            Ok(read_only("spectrum", p.body))
        }
        Command::Map { topic } => {
            let store = Store::open(&root)?;
            let m = store.manifest()?;
            let p = crate::api::map(&store, &m, topic).map_err(|e| e.into_cli())?;
            Ok(read_only("map", p.body))
        }
        Command::Export {
            out,
            topic,
            newspaper,
            article,
        } => {
            let graph = topic.map(|t| {
                (
                    t,
                    GraphFilter {
                        newspaper_id: newspaper,
                        article_id: article,
                    },
                )
            });
            pipeline::export(&Store::open(&root)?, &out, graph)
        }
        Command::Serve { port, host } => {
            let store = Store::open(&root)?;
            store.manifest()?;
            let addr: SocketAddr = format!("{host}:{port}")
                .parse()
                .map_err(|e| CliError::validation(format!("bad listen address: {e}")))?;
            let rt = tokio::runtime::Runtime::new().map_err(|e| CliError::io("tokio runtime", e))?;
            rt.block_on(crate::api::serve(store, addr))
                .map_err(|e| CliError::external(format!("server failed: {e}")))?;
            Ok(read_only("serve", Value::Null))
        }
    }
}

/// Text rendering of an outcome.
pub fn render(out: &Outcome) -> String {
    let mut s = String::new();
    match &out.summary {
        Value::Object(_) if !out.stages.is_empty() || out.command == "status" || out.command.starts_with("config") || out.command == "init" || out.command == "export" => {
            for (stage, hash) in &out.stages {
                s.push_str(&format!("built {stage} {}\n", &hash[..16]));
            }
            s.push_str(&serde_json::to_string_pretty(&out.summary).expect("json"));
            s.push('\n');
        }
        Value::Null => {}
        other => {
            s.push_str(&serde_json::to_string_pretty(other).expect("json"));
            s.push('\n');
        }
    }
    for w in &out.warnings {
        s.push_str(&format!("warning: {w}\n"));
    }
    s
}
