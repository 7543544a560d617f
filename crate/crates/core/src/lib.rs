//! Event-level representation learning for categorical event sequences.
//!
//! The pipeline generates (or ingests) per-patient event sequences, embeds
//! single events with a siamese MLP ([`cat2vec`]), contextualizes them with a
//! transformer autoencoder ([`seq2seq`]), clusters the resulting vectors
//! ([`clusterer`]) and scores the clustering against known groups with
//! adjusted mutual information ([`metrics`]). A sliding-window LDA baseline
//! lives in [`lda`]; experiment orchestration and file formats in
//! [`harness`].

pub mod numcore;
pub mod rng;
pub mod dataset;
pub mod syngen;
pub mod cat2vec;
pub mod clusterer;
pub mod encoded;
pub mod lda;
pub mod metrics;
pub mod seq2seq;
pub mod harness;
