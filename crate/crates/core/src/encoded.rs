//! Per-event representation vectors and their CSV form
//! (`patient_id, position, v0..v{d-1}`).

use std::io::{Read, Write};

use crate::dataset::EventDataset;

#[derive(Debug, thiserror::Error)]
pub enum EncodedError {
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("row {row}: {detail}")]
    Format { row: usize, detail: String },
    #[error("{values} values do not form rows of width {dim}")]
    Shape { values: usize, dim: usize },
}

/// One vector of width `dim` per event, row-major, with provenance.
#[derive(Clone, Debug, PartialEq)]
pub struct EncodedEvents {
    pub patient_ids: Vec<String>,
    pub positions: Vec<usize>,
    pub dim: usize,
    pub data: Vec<f64>,
}

impl EncodedEvents {
    pub fn new(patient_ids: Vec<String>, positions: Vec<usize>, dim: usize, data: Vec<f64>) -> Result<Self, EncodedError> {
        if dim == 0 || data.len() != patient_ids.len() * dim || positions.len() != patient_ids.len() {
            return Err(EncodedError::Shape { values: data.len(), dim });
        }
        Ok(Self { patient_ids, positions, dim, data })
    }

    /// Provenance columns for every event of `dataset`, patient-major.
    pub fn provenance(dataset: &EventDataset) -> (Vec<String>, Vec<usize>) {
        dataset
            .patients
            .iter()
            .flat_map(|p| (0..p.len()).map(move |i| (p.patient_id.clone(), i)))
            .unzip()
    }

    pub fn len(&self) -> usize {
        self.patient_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patient_ids.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    /// Rescales every column to zero mean and unit variance; constant
    /// columns become zero.
    pub fn standardized(&self) -> Self {
        let n = self.len().max(1) as f64;
        let mut out = self.clone();
        for c in 0..self.dim {
            let mean = (0..self.len()).map(|i| self.data[i * self.dim + c]).sum::<f64>() / n;
            let var = (0..self.len()).map(|i| (self.data[i * self.dim + c] - mean).powi(2)).sum::<f64>() / n;
            let sd = var.sqrt();
            for i in 0..self.len() {
                let v = &mut out.data[i * self.dim + c];
                *v = if sd > 1e-12 { (*v - mean) / sd } else { 0.0 };
            }
        }
        out
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), EncodedError> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["patient_id".to_string(), "position".to_string()];
        header.extend((0..self.dim).map(|c| format!("v{c}")));
        w.write_record(&header)?;
        for i in 0..self.len() {
            let mut rec = vec![self.patient_ids[i].clone(), self.positions[i].to_string()];
            rec.extend(self.row(i).iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self, EncodedError> {
        let mut r = csv::Reader::from_reader(input);
        let dim = r.headers()?.len().saturating_sub(2);
        let (mut ids, mut positions, mut data) = (Vec::new(), Vec::new(), Vec::new());
        for (row, rec) in r.records().enumerate() {
            let rec = rec?;
            let bad = |detail: String| EncodedError::Format { row: row + 1, detail };
            ids.push(rec[0].to_string());
            positions.push(rec[1].parse().map_err(|e| bad(format!("position: {e}")))?);
            for field in rec.iter().skip(2) {
                data.push(field.parse::<f64>().map_err(|e| bad(format!("value {field:?}: {e}")))?);
            }
        }
        Self::new(ids, positions, dim, data)
    }
}

/// Ratio of the mean distance between group centroids to the mean distance
/// of events from their own group centroid.
pub fn separation_ratio(points: &[f64], dim: usize, groups: &[usize]) -> f64 {
    let g = groups.iter().max().map_or(0, |m| m + 1);
    let mut centroids = vec![0.0; g * dim];
    let mut counts = vec![0usize; g];
    for (i, &k) in groups.iter().enumerate() {
        counts[k] += 1;
        for c in 0..dim {
            centroids[k * dim + c] += points[i * dim + c];
        }
    }
    for k in 0..g {
        for c in 0..dim {
            centroids[k * dim + c] /= counts[k].max(1) as f64;
        }
    }
    let dist = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let present: Vec<usize> = (0..g).filter(|&k| counts[k] > 0).collect();
    let mut inter = 0.0;
    let mut pairs = 0;
    for (a, &i) in present.iter().enumerate() {
        for &j in &present[a + 1..] {
            inter += dist(&centroids[i * dim..(i + 1) * dim], &centroids[j * dim..(j + 1) * dim]);
            pairs += 1;
        }
    }
    let intra = groups
        .iter()
        .enumerate()
        .map(|(i, &k)| dist(&points[i * dim..(i + 1) * dim], &centroids[k * dim..(k + 1) * dim]))
        .sum::<f64>()
        / groups.len().max(1) as f64;
    (inter / pairs.max(1) as f64) / intra.max(f64::MIN_POSITIVE)
}
