//! Per-patient categorical event sequences and their JSON-Lines form.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Deserializer, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {source}")]
    Json { line: usize, source: serde_json::Error },
    #[error("patient {patient}: {detail}")]
    Invalid { patient: String, detail: String },
    #[error("dataset is empty")]
    Empty,
}

/// One patient's ordered events with optional secondary categories and
/// optional ground-truth groups.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatientSequence {
    #[serde(deserialize_with = "id_from_string_or_number")]
    pub patient_id: String,
    pub events: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub categories: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub groups: Option<Vec<usize>>,
}

impl PatientSequence {
    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }
}

/// Collection of patient sequences over a shared event vocabulary.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EventDataset {
    pub patients: Vec<PatientSequence>,
    /// Size of the event vocabulary; every event code is below it.
    pub vocab_size: usize,
    /// Size of the secondary category vocabulary, when categories exist.
    pub category_vocab_size: Option<usize>,
    /// Number of ground-truth groups, when groups exist.
    pub group_count: Option<usize>,
}

/// Location of one event inside a dataset.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EventRef {
    pub patient: usize,
    pub position: usize,
}

impl EventDataset {
    /// Builds a dataset, inferring vocabulary sizes from the largest codes.
    pub fn from_patients(patients: Vec<PatientSequence>) -> Result<Self, DatasetError> {
        let vocab_size = patients.iter().flat_map(|p| p.events.iter()).max().map_or(0, |m| m + 1);
        let category_vocab_size = patients
            .iter()
            .filter_map(|p| p.categories.as_ref())
            .flatten()
            .max()
            .map(|m| m + 1);
        let group_count = patients
            .iter()
            .filter_map(|p| p.groups.as_ref())
            .flatten()
            .max()
            .map(|m| m + 1);
        let ds = Self { patients, vocab_size, category_vocab_size, group_count };
        ds.validate()?;
        Ok(ds)
    }

    /// Checks lengths and code ranges of every patient.
    pub fn validate(&self) -> Result<(), DatasetError> {
        let has_categories = self.patients.first().is_some_and(|p| p.categories.is_some());
        for p in &self.patients {
            let bad = |detail: String| DatasetError::Invalid { patient: p.patient_id.clone(), detail };
            if let Some(&e) = p.events.iter().find(|&&e| e >= self.vocab_size) {
                return Err(bad(format!("event code {} outside vocabulary of {}", e, self.vocab_size)));
            }
            if p.categories.is_some() != has_categories {
                return Err(bad("categories present for some patients only".into()));
            }
            if let Some(cats) = &p.categories {
                if cats.len() != p.events.len() {
                    return Err(bad(format!("{} categories for {} events", cats.len(), p.events.len())));
                }
                let limit = self.category_vocab_size.unwrap_or(0);
                if let Some(&c) = cats.iter().find(|&&c| c >= limit) {
                    return Err(bad(format!("category code {} outside vocabulary of {}", c, limit)));
                }
            }
            if let Some(groups) = &p.groups {
                if groups.len() != p.events.len() {
                    return Err(bad(format!("{} groups for {} events", groups.len(), p.events.len())));
                }
                let limit = self.group_count.unwrap_or(0);
                if let Some(&g) = groups.iter().find(|&&g| g >= limit) {
                    return Err(bad(format!("group {} outside {} groups", g, limit)));
                }
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.patients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patients.is_empty()
    }

    pub fn event_count(&self) -> usize {
        self.patients.iter().map(PatientSequence::len).sum()
    }

    pub fn has_groups(&self) -> bool {
        !self.patients.is_empty() && self.patients.iter().all(|p| p.groups.is_some())
    }

    pub fn has_categories(&self) -> bool {
        !self.patients.is_empty() && self.patients.iter().all(|p| p.categories.is_some())
    }

    /// Every event location in patient-major order.
    pub fn event_refs(&self) -> impl Iterator<Item = EventRef> + '_ {
        self.patients
            .iter()
            .enumerate()
            .flat_map(|(patient, p)| (0..p.len()).map(move |position| EventRef { patient, position }))
    }

    /// Ground-truth groups flattened in patient-major order.
    pub fn flat_groups(&self) -> Option<Vec<usize>> {
        if !self.has_groups() {
            return None;
        }
        Some(self.patients.iter().flat_map(|p| p.groups.iter().flatten().copied()).collect())
    }

    pub fn write_jsonl(&self, path: &Path) -> Result<(), DatasetError> {
        let mut out = BufWriter::new(File::create(path)?);
        self.write_jsonl_to(&mut out)?;
        out.flush()?;
        Ok(())
    }

    pub fn write_jsonl_to<W: Write>(&self, out: &mut W) -> Result<(), DatasetError> {
        for p in &self.patients {
            serde_json::to_writer(&mut *out, p).map_err(|source| DatasetError::Json { line: 0, source })?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_jsonl(path: &Path) -> Result<Self, DatasetError> {
        Self::read_jsonl_from(BufReader::new(File::open(path)?))
    }

    pub fn read_jsonl_from<R: BufRead>(reader: R) -> Result<Self, DatasetError> {
        let mut patients = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let p: PatientSequence =
                serde_json::from_str(&line).map_err(|source| DatasetError::Json { line: i + 1, source })?;
            patients.push(p);
        }
        if patients.is_empty() {
            return Err(DatasetError::Empty);
        }
        Self::from_patients(patients)
    }
}

fn id_from_string_or_number<'de, D: Deserializer<'de>>(d: D) -> Result<String, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Id {
        Text(String),
        Int(i64),
    }
    Ok(match Id::deserialize(d)? {
        Id::Text(s) => s,
        Id::Int(n) => n.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn patient(id: &str, events: Vec<usize>, groups: Option<Vec<usize>>) -> PatientSequence {
        PatientSequence { patient_id: id.into(), events, categories: None, groups }
    }

    #[test]
    fn jsonl_roundtrip_keeps_order() {
        let ds = EventDataset::from_patients(vec![
            patient("a", vec![3, 1, 4, 1, 5], Some(vec![0, 0, 1, 1, 1])),
            patient("b", vec![9, 2, 6], Some(vec![1, 0, 0])),
        ])
        .unwrap();
        let mut buf = Vec::new();
        ds.write_jsonl_to(&mut buf).unwrap();
        let back = EventDataset::read_jsonl_from(buf.as_slice()).unwrap();
        assert_eq!(back, ds);
        assert_eq!(back.vocab_size, 10);
        assert_eq!(back.group_count, Some(2));
    }

    #[test]
    fn numeric_patient_ids_are_accepted() {
        let text = "{\"patient_id\": 17, \"events\": [0, 1]}\n";
        let ds = EventDataset::read_jsonl_from(text.as_bytes()).unwrap();
        assert_eq!(ds.patients[0].patient_id, "17");
        assert!(!ds.has_groups());
    }

    #[test]
    fn mismatched_lengths_are_rejected() {
        let err = EventDataset::from_patients(vec![patient("a", vec![0, 1], Some(vec![0]))]);
        assert!(matches!(err, Err(DatasetError::Invalid { .. })));
        assert!(matches!(EventDataset::read_jsonl_from("".as_bytes()), Err(DatasetError::Empty)));
    }

    #[test]
    fn event_refs_are_patient_major() {
        let ds = EventDataset::from_patients(vec![patient("a", vec![0, 1], None), patient("b", vec![2], None)])
            .unwrap();
        let refs: Vec<_> = ds.event_refs().map(|r| (r.patient, r.position)).collect();
        assert_eq!(refs, vec![(0, 0), (0, 1), (1, 0)]);
        assert_eq!(ds.event_count(), 3);
    }
}
