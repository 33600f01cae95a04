//! Hierarchical density-based clustering of document embeddings.
//!
//! The path is: optional [`Reducer`] → core distances → mutual-reachability
//! MST → single-linkage dendrogram → condensed tree → excess-of-mass cluster
//! selection. Every tie is broken by the lower point index so that runs are
//! bit-reproducible.

mod embeddings;
mod extract;
mod hdbscan;
mod pca;
mod quality;

pub use embeddings::{load_embeddings_binary, load_embeddings_jsonl, EmbeddingSet};
pub use extract::{extract_clusters, ClusterAssignment, Labels};
pub use hdbscan::{
    condense, core_distances, hdbscan_fit, minimum_spanning_tree, single_linkage,
    CondensedNode, CondensedTree, Dendrogram, HdbscanParams, Merge, MstEdge,
    MutualReachability, PointEvent,
};
pub use pca::{reduce_pca, Passthrough, Pca, Reduced, Reducer};
pub use quality::{quality_report, QualityFlag, QualityReport, QualityThresholds};

#[derive(Debug, thiserror::Error)]
pub enum ClusteringError {
    #[error("embedding set is inconsistent: {0}")]
    InvalidEmbeddings(String),
    #[error("cannot read embeddings: {0}")]
    Io(#[from] std::io::Error),
    #[error("embedding record on line {line} is malformed: {message}")]
    Record { line: usize, message: String },
    #[error("target dimension {target} exceeds input dimension {dim}")]
    TargetDim { target: usize, dim: usize },
    #[error("need at least {needed} points ({constraint}), got {got}")]
    TooFewPoints {
        needed: usize,
        got: usize,
        constraint: &'static str,
    },
    #[error("invalid parameter: {0}")]
    Param(String),
}
