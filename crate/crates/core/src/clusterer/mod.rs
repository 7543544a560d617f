//! Density-based clustering of event representations and the post-hoc
//! relabeling of noise points.

mod hdbscan;
mod phc;

pub use hdbscan::{
    cluster_ids, core_distances, euclidean, hdbscan, hdbscan_detailed, mutual_reachability,
    mutual_reachability_mst, single_linkage, CondensedEntry, CondensedTree, HdbscanParams, HdbscanResult,
    Merge, MstEdge, Points,
};
pub use phc::{phc, PhcOutcome, PhcStatus, DEFAULT_PHC_K};

use serde::{Deserialize, Serialize};

/// Label reserved for points that belong to no cluster.
pub const NOISE: i64 = -1;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum ClusterError {
    #[error("{len} coordinates cannot form points of dimension {dim}")]
    Shape { len: usize, dim: usize },
    #[error("non-finite coordinate")]
    NonFinite,
    #[error("{n} points is fewer than min_cluster_size {min_cluster_size}")]
    TooFewPoints { n: usize, min_cluster_size: usize },
    #[error("invalid parameters: {0}")]
    Params(String),
    #[error("{labels} labels for {points} points")]
    LengthMismatch { labels: usize, points: usize },
}

/// Integer label per event; [`NOISE`] marks unclustered events.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelAssignment {
    labels: Vec<i64>,
}

impl LabelAssignment {
    pub fn new(labels: Vec<i64>) -> Self {
        Self { labels }
    }

    pub fn labels(&self) -> &[i64] {
        &self.labels
    }

    pub fn into_labels(self) -> Vec<i64> {
        self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn noise_count(&self) -> usize {
        self.labels.iter().filter(|&&l| l == NOISE).count()
    }

    pub fn cluster_count(&self) -> usize {
        cluster_ids(&self.labels).len()
    }

    /// Renumbers non-noise labels to `0..k` in order of first appearance.
    pub fn compacted(&self) -> Self {
        let mut map = std::collections::HashMap::new();
        let labels = self
            .labels
            .iter()
            .map(|&l| {
                if l == NOISE {
                    NOISE
                } else {
                    let next = map.len() as i64;
                    *map.entry(l).or_insert(next)
                }
            })
            .collect();
        Self { labels }
    }
}

impl From<Vec<i64>> for LabelAssignment {
    fn from(labels: Vec<i64>) -> Self {
        Self::new(labels)
    }
}
