//! Information-theoretic agreement between two labelings.
//!
//! All logarithms are natural. Expected mutual information is the exact
//! expectation under the hypergeometric (fixed-marginals permutation) model,
//! evaluated with a log-factorial table so large counts never overflow.

use std::collections::HashMap;
use std::hash::Hash;

use serde::{Deserialize, Serialize};

use crate::clusterer::NOISE;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("label length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("no labels to compare")]
    Empty,
    #[error("marginals sum to {rows} and {cols}, expected {n}")]
    Marginals { rows: usize, cols: usize, n: usize },
}

/// Counts of co-occurring labels.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ContingencyTable {
    counts: Vec<Vec<usize>>,
    row_sums: Vec<usize>,
    col_sums: Vec<usize>,
    n: usize,
}

impl ContingencyTable {
    pub fn from_labels<A, B>(rows: &[A], cols: &[B]) -> Result<Self, MetricsError>
    where
        A: Eq + Hash + Copy,
        B: Eq + Hash + Copy,
    {
        if rows.len() != cols.len() {
            return Err(MetricsError::LengthMismatch { left: rows.len(), right: cols.len() });
        }
        if rows.is_empty() {
            return Err(MetricsError::Empty);
        }
        let ri = dense_index(rows);
        let ci = dense_index(cols);
        let nr = ri.iter().max().map_or(0, |m| m + 1);
        let nc = ci.iter().max().map_or(0, |m| m + 1);
        let mut counts = vec![vec![0usize; nc]; nr];
        for (&r, &c) in ri.iter().zip(&ci) {
            counts[r][c] += 1;
        }
        Ok(Self::from_counts(counts))
    }

    pub fn from_counts(counts: Vec<Vec<usize>>) -> Self {
        let nc = counts.first().map_or(0, Vec::len);
        let row_sums: Vec<usize> = counts.iter().map(|r| r.iter().sum()).collect();
        let col_sums: Vec<usize> = (0..nc).map(|j| counts.iter().map(|r| r[j]).sum()).collect();
        let n = row_sums.iter().sum();
        Self { counts, row_sums, col_sums, n }
    }

    pub fn counts(&self) -> &[Vec<usize>] {
        &self.counts
    }

    pub fn row_sums(&self) -> &[usize] {
        &self.row_sums
    }

    pub fn col_sums(&self) -> &[usize] {
        &self.col_sums
    }

    pub fn total(&self) -> usize {
        self.n
    }
}

/// Maps arbitrary labels to `0..k` in order of first appearance.
fn dense_index<T: Eq + Hash + Copy>(labels: &[T]) -> Vec<usize> {
    let mut ids = HashMap::new();
    labels
        .iter()
        .map(|l| {
            let next = ids.len();
            *ids.entry(*l).or_insert(next)
        })
        .collect()
}

/// Shannon entropy of a count vector.
pub fn entropy(counts: &[usize]) -> f64 {
    let n: usize = counts.iter().sum();
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    -counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            p * p.ln()
        })
        .sum::<f64>()
}

pub fn mutual_info(table: &ContingencyTable) -> f64 {
    let n = table.n as f64;
    let mut mi = 0.0;
    for (i, row) in table.counts.iter().enumerate() {
        for (j, &nij) in row.iter().enumerate() {
            if nij == 0 {
                continue;
            }
            let nij = nij as f64;
            let outer = table.row_sums[i] as f64 * table.col_sums[j] as f64;
            mi += nij / n * (n * nij / outer).ln();
        }
    }
    mi.max(0.0)
}

/// `ln(k!)` for `k = 0..=n`.
fn ln_factorials(n: usize) -> Vec<f64> {
    let mut table = Vec::with_capacity(n + 1);
    let mut acc = 0.0;
    table.push(0.0);
    for k in 1..=n {
        acc += (k as f64).ln();
        table.push(acc);
    }
    table
}

/// Expected mutual information of two labelings with the given cluster
/// sizes, over all relabelings that preserve those sizes.
pub fn expected_mi(row_sums: &[usize], col_sums: &[usize], n: usize) -> Result<f64, MetricsError> {
    let (rs, cs): (usize, usize) = (row_sums.iter().sum(), col_sums.iter().sum());
    if rs != n || cs != n {
        return Err(MetricsError::Marginals { rows: rs, cols: cs, n });
    }
    if n == 0 {
        return Err(MetricsError::Empty);
    }
    let lf = ln_factorials(n);
    let nf = n as f64;
    let mut emi = 0.0;
    for &a in row_sums.iter().filter(|&&a| a > 0) {
        for &b in col_sums.iter().filter(|&&b| b > 0) {
            let lo = (a + b).saturating_sub(n).max(1);
            let hi = a.min(b);
            let base = lf[a] + lf[b] + lf[n - a] + lf[n - b] - lf[n];
            for nij in lo..=hi {
                let log_p = base - lf[nij] - lf[a - nij] - lf[b - nij] - lf[n + nij - a - b];
                let term = nij as f64 / nf * (nf * nij as f64 / (a as f64 * b as f64)).ln();
                emi += term * log_p.exp();
            }
        }
    }
    Ok(emi.max(0.0))
}

/// How the reserved noise label is treated when scoring.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseHandling {
    /// Noise is one more class.
    #[default]
    IncludeNoise,
    /// Events whose predicted label is noise are dropped before scoring.
    ExcludeNoise,
}

/// Every quantity that enters the adjusted score.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AmiReport {
    pub ami: f64,
    pub mi: f64,
    pub emi: f64,
    pub h_true: f64,
    pub h_pred: f64,
    pub n: usize,
}

/// `(MI − EMI) / (mean(H_true, H_pred) − EMI)` with noise kept as a class.
pub fn ami(true_labels: &[i64], pred_labels: &[i64]) -> Result<f64, MetricsError> {
    Ok(ami_report(true_labels, pred_labels, NoiseHandling::IncludeNoise)?.ami)
}

pub fn ami_report(true_labels: &[i64], pred_labels: &[i64], noise: NoiseHandling) -> Result<AmiReport, MetricsError> {
    if true_labels.len() != pred_labels.len() {
        return Err(MetricsError::LengthMismatch { left: true_labels.len(), right: pred_labels.len() });
    }
    let (t, p): (Vec<i64>, Vec<i64>) = match noise {
        NoiseHandling::IncludeNoise => (true_labels.to_vec(), pred_labels.to_vec()),
        NoiseHandling::ExcludeNoise => true_labels
            .iter()
            .zip(pred_labels)
            .filter(|(_, &p)| p != NOISE)
            .map(|(&t, &p)| (t, p))
            .unzip(),
    };
    let table = ContingencyTable::from_labels(&t, &p)?;
    Ok(ami_from_table(&table))
}

pub fn ami_from_table(table: &ContingencyTable) -> AmiReport {
    let n = table.total();
    let h_true = entropy(table.row_sums());
    let h_pred = entropy(table.col_sums());
    let single = |sums: &[usize]| sums.iter().filter(|&&s| s > 0).count() <= 1;
    if single(table.row_sums()) && single(table.col_sums()) {
        return AmiReport { ami: 1.0, mi: 0.0, emi: 0.0, h_true, h_pred, n };
    }
    let mi = mutual_info(table);
    let emi = expected_mi(table.row_sums(), table.col_sums(), n).expect("marginals come from the table");
    if identical_partitions(table) {
        return AmiReport { ami: 1.0, mi, emi, h_true, h_pred, n };
    }
    let mean_h = 0.5 * (h_true + h_pred);
    let mut denominator = mean_h - emi;
    if denominator < 0.0 {
        denominator = denominator.min(-f64::EPSILON);
    } else {
        denominator = denominator.max(f64::EPSILON);
    }
    AmiReport { ami: (mi - emi) / denominator, mi, emi, h_true, h_pred, n }
}

/// Each row and each column has exactly one non-zero cell.
fn identical_partitions(table: &ContingencyTable) -> bool {
    let rows_ok = table.counts().iter().all(|r| r.iter().filter(|&&c| c > 0).count() <= 1);
    let cols_ok = (0..table.col_sums().len()).all(|j| table.counts().iter().filter(|r| r[j] > 0).count() <= 1);
    rows_ok && cols_ok
}
