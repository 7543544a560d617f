use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use case::cat2vec::Cat2Vec;
use case::clusterer::LabelAssignment;
use case::dataset::EventDataset;
use case::encoded::EncodedEvents;
use case::harness::{self, ExperimentConfig, HarnessError, IngestFormat, IngestSchema};
use case::lda::{LdaConfig, LdaModel};
use case::metrics::{ami_report, NoiseHandling};
use case::seq2seq::Seq2Seq;
use case::syngen::generate_dataset;

/// Event-level group discovery in categorical event sequences.
#[derive(Parser)]
#[command(name = "case", version)]
struct Cli {
    /// Log progress (repeat for more detail).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset as JSON Lines.
    Synth {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the event encoder and save its parameters.
    TrainCat2vec {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the sequence autoencoder on encoded events and save it.
    TrainSeq2seq {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        cat2vec: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write per-event representations (`patient_id,position,v0..`).
    Represent {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        cat2vec: PathBuf,
        /// Without it, the Cat2Vec encodings themselves are written.
        #[arg(long)]
        seq2seq: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Cluster representations and relabel noise.
    Cluster {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Keep density-clustering noise as it is.
        #[arg(long)]
        no_phc: bool,
    },
    /// Fit the sliding-window topic model and write event labels.
    Lda {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        data: PathBuf,
        /// Defaults to the number of groups in the data, else the config value.
        #[arg(long)]
        topics: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out_model: PathBuf,
        #[arg(long)]
        out_labels: PathBuf,
    },
    /// Score labels against the true groups of a dataset.
    Evaluate {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        /// Drop events predicted as noise before scoring.
        #[arg(long)]
        exclude_noise: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the grid of group counts and vocabulary sizes.
    Grid {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Export encodings and 2-D projections for plotting.
    Visual {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Convert real event data to a dataset with a dense vocabulary.
    Ingest {
        #[arg(long)]
        input: PathBuf,
        /// Guessed from the extension when absent.
        #[arg(long, value_enum)]
        format: Option<Format>,
        /// TOML file with field names and the length threshold.
        #[arg(long)]
        schema: Option<PathBuf>,
        #[arg(long)]
        drop_at_or_below: Option<usize>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        vocab: PathBuf,
    },
    /// Project representations onto their two principal axes.
    Pca {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum Format {
    Csv,
    Jsonl,
}

/// Topic model saved together with the settings that produced it.
#[derive(Serialize, Deserialize)]
struct LdaArtifact {
    config: LdaConfig,
    model: LdaModel,
}

type Result<T> = std::result::Result<T, HarnessError>;

fn stage(name: &'static str) -> impl Fn(String) -> HarnessError {
    move |detail| HarnessError::Stage { stage: name, detail }
}

fn load_config(path: Option<&Path>) -> Result<ExperimentConfig> {
    match path {
        Some(p) => ExperimentConfig::load(p),
        None => Ok(ExperimentConfig::default()),
    }
}

fn seed_of(config: &ExperimentConfig, seed: Option<u64>) -> u64 {
    seed.unwrap_or(config.seeds[0])
}

fn read_dataset(path: &Path) -> Result<EventDataset> {
    EventDataset::read_jsonl(path).map_err(|e| stage("reading dataset")(format!("{}: {e}", path.display())))
}

fn read_encoded(path: &Path) -> Result<EncodedEvents> {
    let file = File::open(path).map_err(|e| HarnessError::Io { path: path.into(), source: e })?;
    EncodedEvents::read_csv(BufReader::new(file)).map_err(|e| stage("reading representations")(format!("{}: {e}", path.display())))
}

fn write_encoded(path: &Path, e: &EncodedEvents) -> Result<()> {
    let file = File::create(path).map_err(|err| HarnessError::Io { path: path.into(), source: err })?;
    e.write_csv(BufWriter::new(file)).map_err(|err| stage("writing representations")(err.to_string()))
}

fn load_cat2vec(path: &Path) -> Result<Cat2Vec> {
    let m: Cat2Vec = harness::read_json(path)?;
    m.validate().map_err(|e| stage("loading cat2vec")(e.to_string()))?;
    Ok(m)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth { config, seed, out } => {
            let c = load_config(config.as_deref())?;
            let s = &c.synth;
            let (ds, _) = generate_dataset(&s.synth_config(s.group_count, s.vocab_size, seed_of(&c, seed)))
                .map_err(|e| HarnessError::Config(e.to_string()))?;
            ds.write_jsonl(&out).map_err(|e| stage("writing dataset")(e.to_string()))?;
            log::info!("{} patients, {} events", ds.len(), ds.event_count());
        }
        Command::TrainCat2vec { config, data, seed, out } => {
            let c = load_config(config.as_deref())?;
            let ds = read_dataset(&data)?;
            let (model, report) = harness::train_cat2vec(&c, &ds, seed_of(&c, seed))?;
            log::info!("cat2vec: {} epochs, final loss {:.4e}", report.epochs(), report.final_loss());
            harness::write_json(&out, &model)?;
        }
        Command::TrainSeq2seq { config, data, cat2vec, seed, out } => {
            let c = load_config(config.as_deref())?;
            let ds = read_dataset(&data)?;
            let enc = harness::encode_events(&c, &load_cat2vec(&cat2vec)?, &ds)?;
            let (model, report) = harness::train_seq2seq(&c, &enc, seed_of(&c, seed))?;
            log::info!("seq2seq: {} epochs, final loss {:.4e}", report.epochs(), report.final_loss());
            harness::write_json(&out, &model)?;
        }
        Command::Represent { config, data, cat2vec, seq2seq, out } => {
            let c = load_config(config.as_deref())?;
            let ds = read_dataset(&data)?;
            let c2v = load_cat2vec(&cat2vec)?;
            let reps = match seq2seq {
                Some(path) => {
                    let enc = harness::encode_events(&c, &c2v, &ds)?;
                    let m: Seq2Seq = harness::read_json(&path)?;
                    m.validate().map_err(|e| stage("loading seq2seq")(e.to_string()))?;
                    m.event_representations(&enc, c.represent.stride).map_err(|e| stage("representation")(e.to_string()))?
                }
                None => c2v.encode_dataset(&ds).map_err(|e| stage("cat2vec encoding")(e.to_string()))?,
            };
            write_encoded(&out, &reps)?;
        }
        Command::Cluster { config, input, out, no_phc } => {
            let c = load_config(config.as_deref())?;
            let reps = read_encoded(&input)?;
            let outcome = harness::cluster_representations(&c.cluster, &reps)?;
            log::info!(
                "{} clusters, {} noise, {} relabeled",
                outcome.case.cluster_count(),
                outcome.case.noise_count(),
                outcome.relabeled
            );
            let labels = if no_phc { outcome.case } else { outcome.case_phc };
            harness::write_labels_csv(&out, &reps.patient_ids, &reps.positions, labels.labels())?;
        }
        Command::Lda { config, data, topics, seed, out_model, out_labels } => {
            let c = load_config(config.as_deref())?;
            let ds = read_dataset(&data)?;
            let k = topics.or(ds.group_count).unwrap_or(c.lda.topics);
            let cfg = LdaConfig { topics: k, seed: seed_of(&c, seed), ..c.lda.clone() };
            cfg.validate().map_err(|e| HarnessError::Config(e.to_string()))?;
            let outcome = harness::lda_labels(&cfg, &ds)?;
            let (ids, positions) = EncodedEvents::provenance(&ds);
            harness::write_labels_csv(&out_labels, &ids, &positions, outcome.event_labels.labels())?;
            harness::write_json(&out_model, &LdaArtifact { config: cfg, model: outcome.model })?;
        }
        Command::Evaluate { data, labels, exclude_noise, out } => {
            let ds = read_dataset(&data)?;
            let truth = ds.flat_groups().ok_or_else(|| stage("evaluate")("dataset has no true groups".into()))?;
            let read = harness::read_labels_csv(&labels)?;
            let index: std::collections::HashMap<(&str, usize), i64> = read
                .patient_ids
                .iter()
                .zip(&read.positions)
                .zip(read.labels.labels())
                .map(|((id, &p), &l)| ((id.as_str(), p), l))
                .collect();
            let (ids, positions) = EncodedEvents::provenance(&ds);
            let mut missing = 0;
            let pred: Vec<i64> = ids
                .iter()
                .zip(positions)
                .map(|(id, p)| {
                    index.get(&(id.as_str(), p)).copied().unwrap_or_else(|| {
                        missing += 1;
                        case::clusterer::NOISE
                    })
                })
                .collect();
            if missing > 0 {
                log::warn!("{missing} events have no label and count as noise");
            }
            let truth: Vec<i64> = truth.iter().map(|&g| g as i64).collect();
            let noise = if exclude_noise { NoiseHandling::ExcludeNoise } else { NoiseHandling::IncludeNoise };
            let report = ami_report(&truth, &pred, noise).map_err(|e| stage("evaluate")(e.to_string()))?;
            match out {
                Some(path) => harness::write_json(&path, &report)?,
                None => println!("{}", serde_json::to_string_pretty(&report).expect("plain numbers")),
            }
            log::info!("clusters in prediction: {}", LabelAssignment::new(pred).cluster_count());
        }
        Command::Grid { config, out_dir } => {
            let c = load_config(config.as_deref())?;
            let dir = out_dir.unwrap_or_else(|| c.output_dir.clone());
            let results = harness::run_grid(&c, Some(&dir))?;
            results.write(&dir)?;
            for s in &results.summary {
                match s.mean {
                    Some(m) => println!(
                        "|G|={:<3} |E|={:<5} lda-window {:.3}  lda-event {:.3}  case {:.3}  case+phc {:.3}",
                        s.group_count, s.vocab_size, m.lda_window, m.lda_event, m.case, m.case_phc
                    ),
                    None => println!("|G|={:<3} |E|={:<5} failed", s.group_count, s.vocab_size),
                }
            }
            if results.cells.iter().all(|c| c.error.is_some()) {
                return Err(stage("grid")("every cell failed".into()));
            }
        }
        Command::Visual { config, seed, out_dir } => {
            let c = match config {
                Some(p) => ExperimentConfig::load(&p)?,
                None => ExperimentConfig::visual(),
            };
            let dir = out_dir.unwrap_or_else(|| c.output_dir.join("visual"));
            let s = harness::run_visual(&c, seed_of(&c, seed), &dir)?;
            println!(
                "separation: cat2vec {:.3}, seq2seq {:.3} (projected {:.3})",
                s.cat2vec_separation, s.seq2seq_separation, s.seq2seq_pca_separation
            );
        }
        Command::Ingest { input, format, schema, drop_at_or_below, out, vocab } => {
            let mut sch: IngestSchema = match schema {
                Some(p) => {
                    let text = std::fs::read_to_string(&p).map_err(|e| HarnessError::Config(format!("{}: {e}", p.display())))?;
                    toml::from_str(&text).map_err(|source| HarnessError::Toml { path: p, source })?
                }
                None => IngestSchema::default(),
            };
            if let Some(t) = drop_at_or_below {
                sch.drop_at_or_below = t;
            }
            let fmt = match format {
                Some(Format::Csv) => IngestFormat::Csv,
                Some(Format::Jsonl) => IngestFormat::Jsonl,
                None => IngestFormat::from_path(&input)
                    .ok_or_else(|| HarnessError::Config(format!("cannot tell the format of {}", input.display())))?,
            };
            let (ds, v, report) = harness::ingest(&input, fmt, &sch)?;
            ds.write_jsonl(&out).map_err(|e| stage("writing dataset")(e.to_string()))?;
            harness::write_json(&vocab, &v)?;
            println!("{}", serde_json::to_string(&report).expect("plain numbers"));
        }
        Command::Pca { input, out } => {
            let reps = read_encoded(&input)?;
            let p = harness::pca2d(&reps.data, reps.dim)?;
            let projected = EncodedEvents::new(reps.patient_ids, reps.positions, 2, p.coords)
                .map_err(|e| stage("projection")(e.to_string()))?;
            write_encoded(&out, &projected)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() { 1 } else { 2 })
        }
    }
}
