//! Real event data: long-format CSV (`patient_id,event[,category]`, one row
//! per event, rows in sequence order) or JSON Lines (one patient per line
//! with an `events` array and optional `categories`). Codes are arbitrary
//! strings or numbers and are mapped to dense indices in order of first
//! appearance.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::HarnessError;
use crate::dataset::{EventDataset, PatientSequence};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IngestFormat {
    Csv,
    Jsonl,
}

impl IngestFormat {
    /// Guesses the format from the file extension.
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "csv" => Some(Self::Csv),
            "jsonl" | "ndjson" | "json" => Some(Self::Jsonl),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IngestSchema {
    pub patient_field: String,
    /// Column (CSV) or array field (JSON Lines) holding event codes.
    pub event_field: String,
    /// Optional secondary categorical field.
    pub category_field: Option<String>,
    /// Sequences with this many events or fewer are dropped.
    pub drop_at_or_below: usize,
}

impl Default for IngestSchema {
    fn default() -> Self {
        Self { patient_field: "patient_id".into(), event_field: "event".into(), category_field: None, drop_at_or_below: 16 }
    }
}

/// Original codes in dense-index order.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Vocabulary {
    pub events: Vec<String>,
    pub categories: Option<Vec<String>>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub read: usize,
    pub retained: usize,
    pub dropped: usize,
    pub events: usize,
}

#[derive(Default)]
struct Interner {
    ids: HashMap<String, usize>,
    codes: Vec<String>,
}

impl Interner {
    fn id(&mut self, code: &str) -> usize {
        if let Some(&i) = self.ids.get(code) {
            return i;
        }
        self.codes.push(code.to_string());
        self.ids.insert(code.to_string(), self.codes.len() - 1);
        self.codes.len() - 1
    }
}

struct RawPatient {
    id: String,
    events: Vec<String>,
    categories: Option<Vec<String>>,
}

fn bad(path: &Path, detail: String) -> HarnessError {
    HarnessError::stage("ingest", format!("{}: {detail}", path.display()))
}

fn read_csv(path: &Path, schema: &IngestSchema) -> Result<Vec<RawPatient>, HarnessError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| bad(path, e.to_string()))?;
    let headers = r.headers().map_err(|e| bad(path, e.to_string()))?.clone();
    let find = |name: &str| headers.iter().position(|h| h == name);
    let pc = find(&schema.patient_field).ok_or_else(|| bad(path, format!("missing column {}", schema.patient_field)))?;
    let ec = find(&schema.event_field).ok_or_else(|| bad(path, format!("missing column {}", schema.event_field)))?;
    let cc = match &schema.category_field {
        Some(c) => Some(find(c).ok_or_else(|| bad(path, format!("missing column {c}")))?),
        None => None,
    };
    if let Some(extra) = headers.iter().enumerate().find(|(i, _)| *i != pc && *i != ec && Some(*i) != cc) {
        return Err(bad(path, format!("unknown column {}", extra.1)));
    }
    let mut order: HashMap<String, usize> = HashMap::new();
    let mut patients: Vec<RawPatient> = Vec::new();
    for (line, row) in r.records().enumerate() {
        let row = row.map_err(|e| bad(path, e.to_string()))?;
        let id = &row[pc];
        let i = *order.entry(id.to_string()).or_insert_with(|| {
            patients.push(RawPatient { id: id.to_string(), events: Vec::new(), categories: cc.map(|_| Vec::new()) });
            patients.len() - 1
        });
        if row[ec].is_empty() {
            return Err(bad(path, format!("row {}: empty event code", line + 2)));
        }
        patients[i].events.push(row[ec].to_string());
        if let (Some(c), Some(cats)) = (cc, patients[i].categories.as_mut()) {
            cats.push(row[c].to_string());
        }
    }
    Ok(patients)
}

fn code_text(v: &Value) -> Option<String> {
    match v {
        Value::String(s) if !s.is_empty() => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        _ => None,
    }
}

fn read_jsonl(path: &Path, schema: &IngestSchema) -> Result<Vec<RawPatient>, HarnessError> {
    let file = File::open(path).map_err(|e| HarnessError::io(path, e))?;
    let mut patients = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| HarnessError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let at = |d: String| bad(path, format!("line {}: {d}", i + 1));
        let obj: serde_json::Map<String, Value> = serde_json::from_str(&line).map_err(|e| at(e.to_string()))?;
        let known = |k: &str| k == schema.patient_field || k == schema.event_field || Some(k) == schema.category_field.as_deref();
        if let Some(k) = obj.keys().find(|k| !known(k)) {
            return Err(at(format!("unknown field {k}")));
        }
        let id = obj.get(&schema.patient_field).and_then(code_text).ok_or_else(|| at(format!("missing {}", schema.patient_field)))?;
        let codes = |field: &str| -> Result<Vec<String>, HarnessError> {
            let arr = obj.get(field).and_then(Value::as_array).ok_or_else(|| at(format!("missing array {field}")))?;
            arr.iter().map(|v| code_text(v).ok_or_else(|| at(format!("bad code {v} in {field}")))).collect()
        };
        let events = codes(&schema.event_field)?;
        let categories = match &schema.category_field {
            Some(c) => {
                let cats = codes(c)?;
                if cats.len() != events.len() {
                    return Err(at(format!("{} categories for {} events", cats.len(), events.len())));
                }
                Some(cats)
            }
            None => None,
        };
        patients.push(RawPatient { id, events, categories });
    }
    Ok(patients)
}

/// Reads `path`, drops short sequences and maps codes to dense indices.
pub fn ingest(path: &Path, format: IngestFormat, schema: &IngestSchema) -> Result<(EventDataset, Vocabulary, IngestReport), HarnessError> {
    let raw = match format {
        IngestFormat::Csv => read_csv(path, schema)?,
        IngestFormat::Jsonl => read_jsonl(path, schema)?,
    };
    if raw.is_empty() {
        return Err(bad(path, "no patients".into()));
    }
    let read = raw.len();
    let kept: Vec<RawPatient> = raw.into_iter().filter(|p| p.events.len() > schema.drop_at_or_below).collect();
    let report = IngestReport {
        read,
        retained: kept.len(),
        dropped: read - kept.len(),
        events: kept.iter().map(|p| p.events.len()).sum(),
    };
    if kept.is_empty() {
        log::warn!("every sequence has {} events or fewer; nothing retained", schema.drop_at_or_below);
    } else if report.dropped > 0 {
        log::info!("dropped {} of {} sequences with {} events or fewer", report.dropped, read, schema.drop_at_or_below);
    }

    let (mut ev, mut cat) = (Interner::default(), Interner::default());
    let patients: Vec<PatientSequence> = kept
        .iter()
        .map(|p| PatientSequence {
            patient_id: p.id.clone(),
            events: p.events.iter().map(|c| ev.id(c)).collect(),
            categories: p.categories.as_ref().map(|cs| cs.iter().map(|c| cat.id(c)).collect()),
            groups: None,
        })
        .collect();
    let has_categories = schema.category_field.is_some();
    let dataset = EventDataset {
        patients,
        vocab_size: ev.codes.len(),
        category_vocab_size: has_categories.then_some(cat.codes.len()),
        group_count: None,
    };
    dataset.validate().map_err(|e| bad(path, e.to_string()))?;
    let vocab = Vocabulary { events: ev.codes, categories: has_categories.then_some(cat.codes) };
    Ok((dataset, vocab, report))
}

/// Writes `dataset` back in long CSV form with the original codes.
pub fn export_csv(dataset: &EventDataset, vocab: &Vocabulary, schema: &IngestSchema, path: &Path) -> Result<(), HarnessError> {
    let stage = |e: csv::Error| HarnessError::stage("export", e);
    let mut w = csv::Writer::from_path(path).map_err(stage)?;
    let mut header = vec![schema.patient_field.as_str(), schema.event_field.as_str()];
    header.extend(schema.category_field.as_deref());
    w.write_record(&header).map_err(stage)?;
    for p in &dataset.patients {
        for (i, &e) in p.events.iter().enumerate() {
            let mut row = vec![p.patient_id.as_str(), vocab.events[e].as_str()];
            if let (Some(cats), Some(names)) = (&p.categories, &vocab.categories) {
                row.push(names[cats[i]].as_str());
            }
            w.write_record(&row).map_err(stage)?;
        }
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}
