//! Per-article ontology extraction, consistency auditing and graph building.

pub mod audit;
pub mod export;
pub mod extract;
pub mod graph;
pub mod parse;
pub mod prompt;

use serde::{Deserialize, Serialize};

pub use audit::{check_consistency, prune, ConsistencyReport, ElementError};
pub use export::{gexf_string, read_edge_csv, write_edge_csv, write_gexf, ExportError};
pub use extract::{
    extract, extract_batch, BatchOutcome, CannedLlm, ExtractConfig, LlmClient, LlmError, LlmRequest, RecordingSleeper,
    Sleeper, ThreadSleeper,
};
pub use graph::{build_graph, communities, filter_graph, GraphEdge, GraphFilter, GraphNode, OntologyGraph};
pub use parse::{parse_reply, ParseError, ParsedReply};
pub use prompt::{build_prompt, build_prompt_text, PROMPT_TEMPLATE};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct OntologyObject {
    pub name: String,
    pub instance_of: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct OntologyRelationship {
    pub name: String,
    pub from: String,
    pub to: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OntologyDocument {
    pub article_id: String,
    pub class_names: Vec<String>,
    pub objects: Vec<OntologyObject>,
    pub relationships: Vec<OntologyRelationship>,
    /// Last reply received, verbatim.
    pub raw_reply: String,
    pub attempt_count: u32,
    #[serde(default)]
    pub failed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl OntologyDocument {
    pub fn from_reply(article_id: &str, raw_reply: &str, attempt_count: u32) -> Result<Self, ParseError> {
        let parsed = parse_reply(raw_reply)?;
        Ok(OntologyDocument {
            article_id: article_id.to_string(),
            class_names: parsed.class_names,
            objects: parsed.objects,
            relationships: parsed.relationships,
            raw_reply: raw_reply.to_string(),
            attempt_count,
            failed: false,
            error: None,
        })
    }

    pub fn failure(article_id: &str, raw_reply: &str, attempt_count: u32, error: String) -> Self {
        OntologyDocument {
            article_id: article_id.to_string(),
            class_names: Vec::new(),
            objects: Vec::new(),
            relationships: Vec::new(),
            raw_reply: raw_reply.to_string(),
            attempt_count,
            failed: true,
            error: Some(error),
        }
    }
}
