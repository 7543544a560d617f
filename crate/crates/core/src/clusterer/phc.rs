//! Post-hoc relabeling: each noise point takes the most frequent label among
//! its `k` nearest labeled (non-noise) points.

use std::collections::HashMap;

use super::hdbscan::Points;
use super::{ClusterError, LabelAssignment, NOISE};

pub const DEFAULT_PHC_K: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PhcStatus {
    /// Every noise point was relabeled (or there was none).
    Relabeled,
    /// Every point was noise; labels were returned unchanged.
    AllNoise,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PhcOutcome {
    pub labels: LabelAssignment,
    pub status: PhcStatus,
    pub relabeled: usize,
}

/// Single pass over the noise points, voting only with the original
/// non-noise labels. Ties between equally frequent labels go to the label
/// whose nearest member is closest.
pub fn phc(labels: &LabelAssignment, points: &Points<'_>, k: usize) -> Result<PhcOutcome, ClusterError> {
    if labels.len() != points.len() {
        return Err(ClusterError::LengthMismatch { labels: labels.len(), points: points.len() });
    }
    if k == 0 {
        return Err(ClusterError::Params("phc needs k ≥ 1".into()));
    }
    let original = labels.labels();
    let labeled: Vec<usize> = (0..original.len()).filter(|&i| original[i] != NOISE).collect();
    if labeled.is_empty() {
        log::warn!("post-hoc relabeling skipped: every point is noise");
        return Ok(PhcOutcome { labels: labels.clone(), status: PhcStatus::AllNoise, relabeled: 0 });
    }
    let k = k.min(labeled.len());
    let mut out = original.to_vec();
    let mut relabeled = 0;
    let mut dists: Vec<(f64, usize)> = Vec::with_capacity(labeled.len());
    for i in (0..original.len()).filter(|&i| original[i] == NOISE) {
        dists.clear();
        dists.extend(labeled.iter().map(|&j| (points.distance(i, j), j)));
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if k < dists.len() {
            dists.select_nth_unstable_by(k - 1, cmp);
        }
        let neighbours = &mut dists[..k];
        neighbours.sort_unstable_by(cmp);

        let mut votes: HashMap<i64, usize> = HashMap::new();
        for &(_, j) in neighbours.iter() {
            *votes.entry(original[j]).or_insert(0) += 1;
        }
        let top = votes.values().copied().max().unwrap_or(0);
        // neighbours are sorted by distance, so the first tied label hit is
        // the one with the closest member
        let winner = neighbours
            .iter()
            .map(|&(_, j)| original[j])
            .find(|l| votes[l] == top)
            .expect("k ≥ 1 neighbours");
        out[i] = winner;
        relabeled += 1;
    }
    Ok(PhcOutcome { labels: LabelAssignment::new(out), status: PhcStatus::Relabeled, relabeled })
}
