//! Project store, pipeline CLI and read-only HTTP API.
//!
//! All mutation goes through the CLI subcommands in [`pipeline`], each of
//! which writes one versioned stage into the [`store`]. The [`api`] only
//! reads stored stage files.

pub mod api;
pub mod cli;
pub mod config;
pub mod demo;
pub mod error;
pub mod llm;
pub mod pipeline;
pub mod store;

pub use config::ProjectConfig;
pub use error::{CliError, CliResult, ErrorKind};
pub use store::{Manifest, Stage, StageRecord, StageStatus, Store};
