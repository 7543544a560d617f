use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::clusterer::LabelAssignment;

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), HarnessError> {
    let file = File::create(path).map_err(|e| HarnessError::io(path, e))?;
    let mut out = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut out, value).map_err(|e| HarnessError::stage("writing json", e))?;
    out.write_all(b"\n").and_then(|_| out.flush()).map_err(|e| HarnessError::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, HarnessError> {
    let file = File::open(path).map_err(|e| HarnessError::io(path, e))?;
    serde_json::from_reader(BufReader::new(file))
        .map_err(|e| HarnessError::stage("reading json", format!("{}: {e}", path.display())))
}

#[derive(Serialize, Deserialize)]
struct LabelRow {
    patient_id: String,
    position: usize,
    label: i64,
}

/// Labels with the event each one belongs to.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledEvents {
    pub patient_ids: Vec<String>,
    pub positions: Vec<usize>,
    pub labels: LabelAssignment,
}

/// Writes `patient_id,position,label` rows.
pub fn write_labels_csv(path: &Path, patient_ids: &[String], positions: &[usize], labels: &[i64]) -> Result<(), HarnessError> {
    let stage = |e: csv::Error| HarnessError::stage("writing labels", e);
    let mut w = csv::Writer::from_path(path).map_err(stage)?;
    for ((id, &position), &label) in patient_ids.iter().zip(positions).zip(labels) {
        w.serialize(LabelRow { patient_id: id.clone(), position, label }).map_err(stage)?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

pub fn read_labels_csv(path: &Path) -> Result<LabeledEvents, HarnessError> {
    let stage = |e: csv::Error| HarnessError::stage("reading labels", format!("{}: {e}", path.display()));
    let mut r = csv::Reader::from_path(path).map_err(stage)?;
    let (mut ids, mut positions, mut labels) = (Vec::new(), Vec::new(), Vec::new());
    for row in r.deserialize::<LabelRow>() {
        let row = row.map_err(stage)?;
        ids.push(row.patient_id);
        positions.push(row.position);
        labels.push(row.label);
    }
    Ok(LabeledEvents { patient_ids: ids, positions, labels: LabelAssignment::new(labels) })
}
