use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::io::{write_json, write_labels_csv};
use super::pca::pca2d;
use super::{ClusterSection, ExperimentConfig, HarnessError};
use crate::cat2vec::{Cat2Vec, TrainReport};
use crate::clusterer::{hdbscan, phc, LabelAssignment, Points, NOISE};
use crate::dataset::EventDataset;
use crate::encoded::{separation_ratio, EncodedEvents};
use crate::lda::{self, LdaConfig, LdaModel};
use crate::metrics::ami;
use crate::seq2seq::{training_windows, Seq2Seq};
use crate::syngen::generate_dataset;

/// Bumped whenever a results file changes shape.
pub const RESULTS_SCHEMA_VERSION: u32 = 1;

pub fn train_cat2vec(config: &ExperimentConfig, dataset: &EventDataset, seed: u64) -> Result<(Cat2Vec, TrainReport), HarnessError> {
    let cfg = config.cat2vec_for(dataset.vocab_size, dataset.category_vocab_size, seed);
    let mut model = Cat2Vec::init(cfg).map_err(|e| HarnessError::Config(format!("cat2vec: {e}")))?;
    let report = model.train(dataset).map_err(|e| HarnessError::stage("cat2vec training", e))?;
    Ok((model, report))
}

/// Cat2Vec encodings as the transformer sees them (standardized when the
/// configuration asks for it).
pub fn encode_events(config: &ExperimentConfig, model: &Cat2Vec, dataset: &EventDataset) -> Result<EncodedEvents, HarnessError> {
    let enc = model.encode_dataset(dataset).map_err(|e| HarnessError::stage("cat2vec encoding", e))?;
    Ok(if config.represent.standardize { enc.standardized() } else { enc })
}

pub fn train_seq2seq(config: &ExperimentConfig, inputs: &EncodedEvents, seed: u64) -> Result<(Seq2Seq, TrainReport), HarnessError> {
    let cfg = config.seq2seq_for(seed);
    let windows = training_windows(inputs, cfg.window_len, cfg.train_stride);
    let mut model = Seq2Seq::init(cfg).map_err(|e| HarnessError::Config(format!("seq2seq: {e}")))?;
    let report = model.train(&windows).map_err(|e| HarnessError::stage("seq2seq training", e))?;
    Ok((model, report))
}

/// Density clustering of representations before and after noise relabeling.
#[derive(Clone, Debug, PartialEq)]
pub struct ClusterOutcome {
    pub case: LabelAssignment,
    pub case_phc: LabelAssignment,
    pub relabeled: usize,
}

pub fn cluster_representations(config: &ClusterSection, reps: &EncodedEvents) -> Result<ClusterOutcome, HarnessError> {
    let points = Points::new(&reps.data, reps.dim).map_err(|e| HarnessError::stage("clustering", e))?;
    let case = hdbscan(&points, config.params()).map_err(|e| HarnessError::stage("clustering", e))?;
    let out = phc(&case, &points, config.phc_k).map_err(|e| HarnessError::stage("post-hoc relabeling", e))?;
    Ok(ClusterOutcome { case, case_phc: out.labels, relabeled: out.relabeled })
}

/// Window and event labels of the topic-model baseline.
#[derive(Clone, Debug)]
pub struct LdaOutcome {
    pub model: LdaModel,
    pub corpus: lda::WindowCorpus,
    pub window_labels: Vec<usize>,
    pub event_labels: LabelAssignment,
}

pub fn lda_labels(config: &LdaConfig, dataset: &EventDataset) -> Result<LdaOutcome, HarnessError> {
    let corpus = lda::make_windows(dataset, config.window_len, config.stride).map_err(|e| HarnessError::stage("lda windows", e))?;
    let model = lda::fit(&corpus, config).map_err(|e| HarnessError::stage("lda", e))?;
    let window_labels = lda::window_topics(&model);
    let event_labels = lda::event_labels(&corpus, &window_labels).map_err(|e| HarnessError::stage("lda", e))?;
    Ok(LdaOutcome { model, corpus, window_labels, event_labels })
}

/// Labels of a subset of events spread over every event of `dataset`
/// (patient-major); events without a row are noise.
fn spread_labels(dataset: &EventDataset, reps: &EncodedEvents, labels: &[i64]) -> Vec<i64> {
    let mut at: HashMap<(&str, usize), i64> = HashMap::with_capacity(labels.len());
    for ((id, &pos), &l) in reps.patient_ids.iter().zip(&reps.positions).zip(labels) {
        at.insert((id.as_str(), pos), l);
    }
    dataset
        .patients
        .iter()
        .flat_map(|p| (0..p.len()).map(|i| at.get(&(p.patient_id.as_str(), i)).copied().unwrap_or(NOISE)).collect::<Vec<_>>())
        .collect()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CellScores {
    pub lda_window: f64,
    pub lda_event: f64,
    pub case: f64,
    pub case_phc: f64,
}

/// Wall-clock seconds per stage.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimes {
    pub synth: f64,
    pub cat2vec: f64,
    pub seq2seq: f64,
    pub represent: f64,
    pub cluster: f64,
    pub lda: f64,
}

/// Outcome of one (group count, vocabulary size, seed) run.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub group_count: usize,
    pub vocab_size: usize,
    pub seed: u64,
    pub scores: Option<CellScores>,
    pub clusters: usize,
    pub noise: usize,
    pub relabeled: usize,
    /// Every group is the same, so each method predicts one class.
    pub degenerate: bool,
    /// Relabeling lowered the score.
    pub phc_regressed: bool,
    pub times: StageTimes,
    pub error: Option<String>,
}

fn secs(t: Instant) -> f64 {
    t.elapsed().as_secs_f64()
}

/// Runs every stage on one generated dataset. Failures are recorded in the
/// result rather than returned. With `out_dir`, the three label files of
/// the cell are written there.
pub fn run_cell(config: &ExperimentConfig, group_count: usize, vocab_size: usize, seed: u64, out_dir: Option<&Path>) -> CellResult {
    let mut result = CellResult { group_count, vocab_size, seed, ..CellResult::default() };
    if let Err(e) = run_cell_inner(config, &mut result, out_dir) {
        log::error!("cell |G|={group_count} |E|={vocab_size} seed {seed}: {e}");
        result.error = Some(e.to_string());
    }
    result
}

fn run_cell_inner(config: &ExperimentConfig, r: &mut CellResult, out_dir: Option<&Path>) -> Result<(), HarnessError> {
    let t = Instant::now();
    let synth = config.synth.synth_config(r.group_count, r.vocab_size, r.seed);
    let (ds, _) = generate_dataset(&synth).map_err(|e| HarnessError::Config(format!("synth: {e}")))?;
    let truth: Vec<i64> = ds.flat_groups().expect("generated data has groups").iter().map(|&g| g as i64).collect();
    r.times.synth = secs(t);

    if r.group_count == 1 {
        // a single group leaves nothing to discover: every method predicts one class
        r.degenerate = true;
        let one = vec![0i64; truth.len()];
        let score = ami(&truth, &one).map_err(|e| HarnessError::stage("scoring", e))?;
        r.scores = Some(CellScores { lda_window: score, lda_event: score, case: score, case_phc: score });
        r.clusters = 1;
        return Ok(());
    }

    let t = Instant::now();
    let (c2v, _) = train_cat2vec(config, &ds, r.seed)?;
    let enc = encode_events(config, &c2v, &ds)?;
    r.times.cat2vec = secs(t);

    let t = Instant::now();
    let (s2s, _) = train_seq2seq(config, &enc, r.seed)?;
    r.times.seq2seq = secs(t);

    let t = Instant::now();
    let reps = s2s
        .event_representations(&enc, config.represent.stride)
        .map_err(|e| HarnessError::stage("representation", e))?;
    r.times.represent = secs(t);

    let t = Instant::now();
    let clusters = cluster_representations(&config.cluster, &reps)?;
    r.clusters = clusters.case.cluster_count();
    r.noise = clusters.case.noise_count();
    r.relabeled = clusters.relabeled;
    let case = spread_labels(&ds, &reps, clusters.case.labels());
    let case_phc = spread_labels(&ds, &reps, clusters.case_phc.labels());
    r.times.cluster = secs(t);

    let t = Instant::now();
    let lda_out = lda_labels(&config.lda_for(r.group_count, r.seed), &ds)?;
    let window_truth = lda::window_level_truth(&lda_out.corpus, &ds).map_err(|e| HarnessError::stage("lda", e))?;
    r.times.lda = secs(t);

    let score = |a: &[i64], b: &[i64]| ami(a, b).map_err(|e| HarnessError::stage("scoring", e));
    let as_i64 = |v: &[usize]| v.iter().map(|&x| x as i64).collect::<Vec<_>>();
    let scores = CellScores {
        lda_window: score(&as_i64(&window_truth), &as_i64(&lda_out.window_labels))?,
        lda_event: score(&truth, lda_out.event_labels.labels())?,
        case: score(&truth, &case)?,
        case_phc: score(&truth, &case_phc)?,
    };
    r.phc_regressed = scores.case_phc < scores.case;
    if r.phc_regressed {
        log::warn!("relabeling lowered the score in cell |G|={} |E|={} seed {}", r.group_count, r.vocab_size, r.seed);
    }
    r.scores = Some(scores);

    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
        let (ids, positions) = EncodedEvents::provenance(&ds);
        write_labels_csv(&dir.join("case_labels.csv"), &ids, &positions, &case)?;
        write_labels_csv(&dir.join("case_phc_labels.csv"), &ids, &positions, &case_phc)?;
        write_labels_csv(&dir.join("lda_event_labels.csv"), &ids, &positions, lda_out.event_labels.labels())?;
    }
    Ok(())
}

/// Mean scores of one grid cell over the seeds that completed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub group_count: usize,
    pub vocab_size: usize,
    pub completed: usize,
    pub mean: Option<CellScores>,
}

/// Versioned results of a grid run with the configuration that produced
/// them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridResults {
    pub schema_version: u32,
    pub config: ExperimentConfig,
    pub cells: Vec<CellResult>,
    pub summary: Vec<CellSummary>,
}

impl GridResults {
    fn summarize(cells: &[CellResult], grid: &[(usize, usize)]) -> Vec<CellSummary> {
        grid.iter()
            .map(|&(g, e)| {
                let done: Vec<CellScores> = cells
                    .iter()
                    .filter(|c| c.group_count == g && c.vocab_size == e)
                    .filter_map(|c| c.scores)
                    .collect();
                let n = done.len() as f64;
                let mean = (!done.is_empty()).then(|| CellScores {
                    lda_window: done.iter().map(|s| s.lda_window).sum::<f64>() / n,
                    lda_event: done.iter().map(|s| s.lda_event).sum::<f64>() / n,
                    case: done.iter().map(|s| s.case).sum::<f64>() / n,
                    case_phc: done.iter().map(|s| s.case_phc).sum::<f64>() / n,
                });
                CellSummary { group_count: g, vocab_size: e, completed: done.len(), mean }
            })
            .collect()
    }

    /// Writes `results.json` and a flat `results.csv` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<(), HarnessError> {
        std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
        write_json(&dir.join("results.json"), self)?;
        let path = dir.join("results.csv");
        let stage = |e: csv::Error| HarnessError::stage("writing results", e);
        let mut w = csv::Writer::from_path(&path).map_err(stage)?;
        w.write_record([
            "group_count", "vocab_size", "seed", "lda_window", "lda_event", "case", "case_phc", "clusters", "noise",
            "seconds", "error",
        ])
        .map_err(stage)?;
        for c in &self.cells {
            let s = c.scores.map(|s| [s.lda_window, s.lda_event, s.case, s.case_phc].map(|v| format!("{v:.6}")));
            let s = s.unwrap_or_else(|| [""; 4].map(String::from));
            let t = c.times;
            let total = t.synth + t.cat2vec + t.seq2seq + t.represent + t.cluster + t.lda;
            w.write_record([
                c.group_count.to_string(),
                c.vocab_size.to_string(),
                c.seed.to_string(),
                s[0].clone(),
                s[1].clone(),
                s[2].clone(),
                s[3].clone(),
                c.clusters.to_string(),
                c.noise.to_string(),
                format!("{total:.1}"),
                c.error.clone().unwrap_or_default(),
            ])
            .map_err(stage)?;
        }
        w.flush().map_err(|e| HarnessError::io(&path, e))
    }
}

fn cell_dir(root: &Path, g: usize, e: usize, seed: u64) -> PathBuf {
    root.join(format!("g{g}_e{e}_seed{seed}"))
}

/// Every grid cell for every seed, `config.threads` at a time. With
/// `out_dir`, each run writes its labels into its own subdirectory.
pub fn run_grid(config: &ExperimentConfig, out_dir: Option<&Path>) -> Result<GridResults, HarnessError> {
    config.validate()?;
    let grid: Vec<(usize, usize)> = config
        .grid
        .group_counts
        .iter()
        .flat_map(|&g| config.grid.vocab_sizes.iter().map(move |&e| (g, e)))
        .collect();
    let jobs: Vec<(usize, usize, u64)> =
        grid.iter().flat_map(|&(g, e)| config.seeds.iter().map(move |&s| (g, e, s))).collect();
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<CellResult>>> = Mutex::new(vec![None; jobs.len()]);
    std::thread::scope(|scope| {
        for _ in 0..config.threads.min(jobs.len()) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(&(g, e, s)) = jobs.get(i) else { break };
                log::info!("cell |G|={g} |E|={e} seed {s}");
                let dir = out_dir.map(|d| cell_dir(d, g, e, s));
                let r = run_cell(config, g, e, s, dir.as_deref());
                slots.lock().expect("no worker panics while holding the lock")[i] = Some(r);
            });
        }
    });
    let cells: Vec<CellResult> = slots.into_inner().expect("workers finished").into_iter().flatten().collect();
    let summary = GridResults::summarize(&cells, &grid);
    Ok(GridResults { schema_version: RESULTS_SCHEMA_VERSION, config: config.clone(), cells, summary })
}

/// Separation ratios of the visualization run, measured in the encoding
/// spaces and in the Seq2Seq projection.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VisualSummary {
    pub schema_version: u32,
    pub seed: u64,
    pub cat2vec_separation: f64,
    pub seq2seq_separation: f64,
    pub seq2seq_pca_separation: f64,
    pub files: Vec<String>,
    pub config: ExperimentConfig,
}

/// Trains both encoders on one synthetic dataset and writes
/// `cat2vec.csv`, `seq2seq.csv`, `pca.csv` (two coordinates per encoder),
/// `groups.csv` and the summary `visual.json` into `out_dir`.
pub fn run_visual(config: &ExperimentConfig, seed: u64, out_dir: &Path) -> Result<VisualSummary, HarnessError> {
    config.validate()?;
    let s = &config.synth;
    let (ds, _) = generate_dataset(&s.synth_config(s.group_count, s.vocab_size, seed))
        .map_err(|e| HarnessError::Config(format!("synth: {e}")))?;
    let (c2v, _) = train_cat2vec(config, &ds, seed)?;
    let raw = c2v.encode_dataset(&ds).map_err(|e| HarnessError::stage("cat2vec encoding", e))?;
    let enc = if config.represent.standardize { raw.standardized() } else { raw.clone() };
    let (s2s, _) = train_seq2seq(config, &enc, seed)?;
    let reps = s2s
        .event_representations(&enc, config.represent.stride)
        .map_err(|e| HarnessError::stage("representation", e))?;

    let truth = ds.flat_groups().expect("generated data has groups");
    let rep_groups: Vec<usize> = {
        let index: HashMap<(&str, usize), usize> =
            raw.patient_ids.iter().zip(&raw.positions).enumerate().map(|(i, (id, &p))| ((id.as_str(), p), i)).collect();
        reps.patient_ids.iter().zip(&reps.positions).map(|(id, &p)| truth[index[&(id.as_str(), p)]]).collect()
    };
    let c2v_pca = pca2d(&raw.data, raw.dim).map_err(|e| HarnessError::stage("projection", e))?;
    let s2s_pca = pca2d(&reps.data, reps.dim).map_err(|e| HarnessError::stage("projection", e))?;

    std::fs::create_dir_all(out_dir).map_err(|e| HarnessError::io(out_dir, e))?;
    let write_encoded = |name: &str, e: &EncodedEvents| -> Result<(), HarnessError> {
        let path = out_dir.join(name);
        let file = std::fs::File::create(&path).map_err(|e| HarnessError::io(&path, e))?;
        e.write_csv(std::io::BufWriter::new(file)).map_err(|e| HarnessError::stage("writing encodings", e))
    };
    write_encoded("cat2vec.csv", &raw)?;
    write_encoded("seq2seq.csv", &reps)?;

    let stage = |e: csv::Error| HarnessError::stage("writing projections", e);
    let s2s_row: HashMap<(&str, usize), usize> =
        reps.patient_ids.iter().zip(&reps.positions).enumerate().map(|(i, (id, &p))| ((id.as_str(), p), i)).collect();
    let mut w = csv::Writer::from_path(out_dir.join("pca.csv")).map_err(stage)?;
    w.write_record(["patient_id", "position", "cat2vec_x", "cat2vec_y", "seq2seq_x", "seq2seq_y"]).map_err(stage)?;
    for (i, (id, &p)) in raw.patient_ids.iter().zip(&raw.positions).enumerate() {
        let (sx, sy) = match s2s_row.get(&(id.as_str(), p)) {
            Some(&j) => (s2s_pca.coords[2 * j].to_string(), s2s_pca.coords[2 * j + 1].to_string()),
            None => (String::new(), String::new()),
        };
        let (cx, cy) = (c2v_pca.coords[2 * i].to_string(), c2v_pca.coords[2 * i + 1].to_string());
        w.write_record([id.clone(), p.to_string(), cx, cy, sx, sy]).map_err(stage)?;
    }
    w.flush().map_err(|e| HarnessError::io(out_dir.join("pca.csv"), e))?;
    let groups: Vec<i64> = truth.iter().map(|&g| g as i64).collect();
    let (ids, positions) = EncodedEvents::provenance(&ds);
    write_labels_csv(&out_dir.join("groups.csv"), &ids, &positions, &groups)?;

    let summary = VisualSummary {
        schema_version: RESULTS_SCHEMA_VERSION,
        seed,
        cat2vec_separation: separation_ratio(&raw.data, raw.dim, &truth),
        seq2seq_separation: separation_ratio(&reps.data, reps.dim, &rep_groups),
        seq2seq_pca_separation: separation_ratio(&s2s_pca.coords, 2, &rep_groups),
        files: ["cat2vec.csv", "seq2seq.csv", "pca.csv", "groups.csv"].map(String::from).to_vec(),
        config: config.clone(),
    };
    write_json(&out_dir.join("visual.json"), &summary)?;
    Ok(summary)
}
