use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::cat2vec::Cat2VecConfig;
use crate::clusterer::{HdbscanParams, DEFAULT_PHC_K};
use crate::lda::LdaConfig;
use crate::numcore::ConvergenceRule;
use crate::seq2seq::TransformerConfig;
use crate::syngen::SynthConfig;

/// Generator settings shared by every cell; the grid overrides the group
/// count and vocabulary size, and each run supplies its own seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSection {
    pub vocab_size: usize,
    pub group_count: usize,
    pub alpha: f64,
    pub beta: f64,
    pub patients: usize,
    pub seq_len: usize,
}

impl Default for SynthSection {
    fn default() -> Self {
        Self { vocab_size: 100, group_count: 6, alpha: 0.03, beta: 2.0, patients: 20, seq_len: 1000 }
    }
}

impl SynthSection {
    pub fn synth_config(&self, group_count: usize, vocab_size: usize, seed: u64) -> SynthConfig {
        SynthConfig::uniform_beta(vocab_size, group_count, self.alpha, self.beta, self.patients, self.seq_len, seed)
    }
}

/// How encoder outputs become per-event vectors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RepresentSection {
    /// Z-score each Cat2Vec column before it enters the transformer.
    pub standardize: bool,
    /// Offset between windows when averaging encoder outputs per event.
    pub stride: usize,
}

impl Default for RepresentSection {
    fn default() -> Self {
        Self { standardize: true, stride: 4 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusterSection {
    pub min_cluster_size: usize,
    pub min_samples: usize,
    /// Neighbours consulted when relabeling noise.
    pub phc_k: usize,
}

impl Default for ClusterSection {
    fn default() -> Self {
        Self { min_cluster_size: 200, min_samples: 50, phc_k: DEFAULT_PHC_K }
    }
}

impl ClusterSection {
    pub fn params(&self) -> HdbscanParams {
        HdbscanParams { min_cluster_size: self.min_cluster_size, min_samples: self.min_samples }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub group_counts: Vec<usize>,
    pub vocab_sizes: Vec<usize>,
}

impl Default for GridSection {
    fn default() -> Self {
        Self { group_counts: vec![6, 12], vocab_sizes: vec![100, 1000] }
    }
}

/// Everything a run needs. Missing keys take the desk-scale defaults.
///
/// `cat2vec.input_dims` and `lda.topics` are filled in per dataset (vocabulary
/// size and number of true groups), and every stage seed is replaced by the
/// run seed, so those keys are ignored in files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seeds: Vec<u64>,
    /// Grid cells evaluated concurrently.
    pub threads: usize,
    pub output_dir: PathBuf,
    pub synth: SynthSection,
    pub cat2vec: Cat2VecConfig,
    pub seq2seq: TransformerConfig,
    pub represent: RepresentSection,
    pub lda: LdaConfig,
    pub cluster: ClusterSection,
    pub grid: GridSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seeds: vec![0, 1, 2],
            threads: 1,
            output_dir: PathBuf::from("case-output"),
            synth: SynthSection::default(),
            // the pull-only objective collapses every event onto one point,
            // so experiments switch the repulsive term on
            cat2vec: Cat2VecConfig { contrastive_weight: 1.0, ..Cat2VecConfig::default() },
            seq2seq: TransformerConfig {
                convergence: ConvergenceRule { max_epochs: 10, ..ConvergenceRule::default() },
                ..TransformerConfig::default()
            },
            represent: RepresentSection::default(),
            lda: LdaConfig::default(),
            cluster: ClusterSection::default(),
            grid: GridSection::default(),
        }
    }
}

impl ExperimentConfig {
    /// Settings of the two-dimensional visualization run: 100 patients and
    /// otherwise the desk defaults.
    pub fn visual() -> Self {
        let mut c = Self::default();
        c.synth.patients = 100;
        c.represent.stride = 8;
        c
    }

    pub fn from_toml_str(text: &str) -> Result<Self, HarnessError> {
        let c: Self = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        let c: Self = toml::from_str(&text).map_err(|source| HarnessError::Toml { path: path.into(), source })?;
        c.validate()?;
        Ok(c)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("configuration is always representable")
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let fail = |m: String| Err(HarnessError::Config(m));
        if self.seeds.is_empty() {
            return fail("at least one seed is required".into());
        }
        if self.threads == 0 {
            return fail("threads must be at least 1".into());
        }
        let s = &self.synth;
        s.synth_config(s.group_count, s.vocab_size, 0)
            .validate()
            .map_err(|e| HarnessError::Config(format!("synth: {e}")))?;
        for &g in &self.grid.group_counts {
            for &e in &self.grid.vocab_sizes {
                s.synth_config(g, e, 0).validate().map_err(|e| HarnessError::Config(format!("grid: {e}")))?;
            }
        }
        self.cat2vec.validate().map_err(|e| HarnessError::Config(format!("cat2vec: {e}")))?;
        self.seq2seq.validate().map_err(|e| HarnessError::Config(format!("seq2seq: {e}")))?;
        if self.seq2seq.d_model != self.cat2vec.encoding_dim {
            return fail(format!(
                "seq2seq.d_model ({}) must equal cat2vec.encoding_dim ({})",
                self.seq2seq.d_model, self.cat2vec.encoding_dim
            ));
        }
        if self.represent.stride == 0 || self.represent.stride > self.seq2seq.window_len {
            return fail(format!("represent.stride must lie in 1..={}", self.seq2seq.window_len));
        }
        if s.seq_len < self.seq2seq.window_len {
            return fail(format!("sequences of {} events are shorter than the window", s.seq_len));
        }
        self.lda.validate().map_err(|e| HarnessError::Config(format!("lda: {e}")))?;
        let c = &self.cluster;
        if c.min_cluster_size < 2 || c.min_samples == 0 || c.phc_k == 0 {
            return fail("cluster: min_cluster_size ≥ 2, min_samples ≥ 1 and phc_k ≥ 1 are required".into());
        }
        Ok(())
    }

    /// Stage configurations for one dataset.
    pub(crate) fn cat2vec_for(&self, vocab_size: usize, categories: Option<usize>, seed: u64) -> Cat2VecConfig {
        let mut c = self.cat2vec.clone();
        c.input_dims = std::iter::once(vocab_size).chain(categories).collect();
        c.seed = seed;
        c
    }

    pub(crate) fn seq2seq_for(&self, seed: u64) -> TransformerConfig {
        TransformerConfig { seed, ..self.seq2seq.clone() }
    }

    pub(crate) fn lda_for(&self, topics: usize, seed: u64) -> LdaConfig {
        LdaConfig { topics, seed, ..self.lda.clone() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_roundtrip() {
        let c = ExperimentConfig::default();
        c.validate().unwrap();
        let back = ExperimentConfig::from_toml_str(&c.to_toml_string()).unwrap();
        assert_eq!(back, c);
        ExperimentConfig::visual().validate().unwrap();
    }

    #[test]
    fn partial_files_fill_defaults() {
        let c = ExperimentConfig::from_toml_str("seeds = [4]\n[synth]\npatients = 3\n").unwrap();
        assert_eq!(c.seeds, vec![4]);
        assert_eq!(c.synth.patients, 3);
        assert_eq!(c.synth.vocab_size, 100);
    }

    #[test]
    fn bad_files_are_config_errors() {
        for text in [
            "seeds = []",
            "[synth]\nalpha = 2.0",
            "[synth]\nunknown = 1",
            "[cat2vec]\nencoding_dim = 4",
            "[represent]\nstride = 0",
            "[cluster]\nmin_cluster_size = 1",
            "[lda]\nburn_in = 5000",
            "threads = 0",
            "seeds = \"x\"",
        ] {
            let err = ExperimentConfig::from_toml_str(text).unwrap_err();
            assert!(err.is_config(), "{text}: {err}");
        }
    }
}
