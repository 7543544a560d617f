//! Experiment configuration, orchestration and file formats.
//!
//! [`ExperimentConfig`] is read from TOML and validated before any stage
//! runs. [`run_cell`] executes the whole pipeline on one synthetic dataset,
//! [`run_grid`] repeats it over a grid of group and vocabulary sizes, and
//! [`run_visual`] exports encodings and their projections for plotting.

mod config;
mod ingest;
mod io;
mod pca;
mod pipeline;

pub use config::{ClusterSection, ExperimentConfig, GridSection, RepresentSection, SynthSection};
pub use ingest::{export_csv, ingest, IngestFormat, IngestReport, IngestSchema, Vocabulary};
pub use io::{read_json, read_labels_csv, write_json, write_labels_csv, LabeledEvents};
pub use pca::{pca2d, Projection};
pub use pipeline::{
    cluster_representations, encode_events, lda_labels, run_cell, run_grid, run_visual, train_cat2vec,
    train_seq2seq, CellResult, CellScores, ClusterOutcome, GridResults, LdaOutcome, StageTimes, VisualSummary,
    RESULTS_SCHEMA_VERSION,
};

use std::path::PathBuf;

/// Failure of a harness operation. Configuration problems are kept apart
/// from failures of a running stage so callers can map them to different
/// exit codes.
#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("cannot parse {path}: {source}")]
    Toml { path: PathBuf, source: toml::de::Error },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{stage} failed: {detail}")]
    Stage { stage: &'static str, detail: String },
}

impl HarnessError {
    pub fn is_config(&self) -> bool {
        matches!(self, Self::Config(_) | Self::Toml { .. })
    }

    pub(crate) fn stage(stage: &'static str, err: impl std::fmt::Display) -> Self {
        Self::Stage { stage, detail: err.to_string() }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io { path: path.into(), source }
    }
}
