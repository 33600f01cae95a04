//! Core analytics for measuring media bias across a multi-newspaper corpus.
//!
//! The pipeline runs roughly in module order:
//!
//! 1. [`corpus`] loads articles and newspapers, filters languages and strips
//!    newspaper-specific noise.
//! 2. [`clustering`] groups document embeddings with HDBSCAN.
//! 3. [`topics`] turns clusters into a c-TF-IDF labelled topic hierarchy.
//! 4. [`scoring`] and [`entities`] validate externally produced sentiment and
//!    entity records and build target contexts.
//! 5. [`biasmetrics`] computes publishing-rate and sentiment deviations, media
//!    bias spectra and map data.
//! 6. [`ontology`] drives LLM ontology extraction, audits the replies and builds
//!    core/domain/local ontology graphs.
//!
//! Everything here is deterministic: identical inputs produce identical outputs,
//! and ties are always broken by the lowest index or id.

pub mod biasmetrics;
pub mod clustering;
pub mod corpus;
pub mod digest;
pub mod entities;
pub mod ontology;
pub mod scoring;
pub mod text;
pub mod topics;

pub use clustering::{ClusterAssignment, CondensedTree, EmbeddingSet};
pub use corpus::{Article, Corpus, Newspaper, NoiseRule};
pub use entities::{EntityGroup, EntityKey, EntityMention, EntitySentiment, TargetContext};
pub use ontology::{OntologyDocument, OntologyGraph};
pub use scoring::{DocKind, DocumentSentiment};
pub use topics::{TopicRecord, TopicTree};

/// Topic id reserved for the noise cluster.
pub const NOISE_TOPIC: i64 = -1;
