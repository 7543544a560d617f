//! Synthetic event sequences with latent treatment groups.
//!
//! Each group owns a random permutation of the event vocabulary and a Zipf
//! law over ranks. A patient starts in a uniformly drawn group; before every
//! subsequent event the group is redrawn uniformly with probability `alpha`
//! (the redraw may return the current group), and the event itself is drawn
//! from the current group's permuted Zipf law.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{EventDataset, PatientSequence};
use crate::rng::{self, stream, CaseRng};

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum SynthError {
    #[error("invalid synthetic configuration: {0}")]
    Config(String),
    #[error("invalid zipf parameters: beta={beta}, size={size}")]
    Zipf { beta: f64, size: usize },
}

/// Parameters of the generative model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub vocab_size: usize,
    pub group_count: usize,
    /// Probability of redrawing the group before each event after the first.
    pub alpha: f64,
    /// Zipf exponent of each group.
    pub betas: Vec<f64>,
    pub patients: usize,
    pub seq_len: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self::uniform_beta(100, 6, 0.03, 2.0, 100, 1_000, 0)
    }
}

impl SynthConfig {
    /// Configuration where every group shares the same exponent.
    pub fn uniform_beta(
        vocab_size: usize,
        group_count: usize,
        alpha: f64,
        beta: f64,
        patients: usize,
        seq_len: usize,
        seed: u64,
    ) -> Self {
        Self { vocab_size, group_count, alpha, betas: vec![beta; group_count], patients, seq_len, seed }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let fail = |m: String| Err(SynthError::Config(m));
        if self.vocab_size == 0 {
            return fail("vocab_size must be at least 1".into());
        }
        if self.group_count == 0 {
            return fail("group_count must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return fail(format!("alpha must lie in [0, 1], got {}", self.alpha));
        }
        if self.betas.len() != self.group_count {
            return fail(format!("{} betas for {} groups", self.betas.len(), self.group_count));
        }
        if let Some(b) = self.betas.iter().find(|b| !(**b > 0.0) || !b.is_finite()) {
            return fail(format!("betas must be positive and finite, got {}", b));
        }
        if self.patients == 0 || self.seq_len == 0 {
            return fail("patients and seq_len must be positive".into());
        }
        Ok(())
    }

    /// Mean length of a run of identical consecutive groups implied by the
    /// redraw rule: `|G| / (alpha (|G| - 1))`.
    pub fn expected_run_length(&self) -> f64 {
        let g = self.group_count as f64;
        g / (self.alpha * (g - 1.0))
    }
}

/// Zipf probabilities over ranks `1..=size`: `pmf[k] ∝ (k + 1)^-beta`.
pub fn zipf_pmf(beta: f64, size: usize) -> Result<Vec<f64>, SynthError> {
    if !(beta > 0.0) || !beta.is_finite() || size == 0 {
        return Err(SynthError::Zipf { beta, size });
    }
    let weights: Vec<f64> = (1..=size).map(|k| (k as f64).powf(-beta)).collect();
    let total: f64 = weights.iter().sum();
    Ok(weights.into_iter().map(|w| w / total).collect())
}

/// Permuted Zipf law of a single group.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupModel {
    /// `permutation[rank]` is the event emitted at that rank.
    pub permutation: Vec<usize>,
    /// Cumulative rank probabilities; the last entry is 1.
    pub cdf: Vec<f64>,
}

impl GroupModel {
    pub fn new(permutation: Vec<usize>, pmf: &[f64]) -> Self {
        let mut acc = 0.0;
        let mut cdf: Vec<f64> = pmf
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        if let Some(last) = cdf.last_mut() {
            *last = 1.0;
        }
        Self { permutation, cdf }
    }

    /// Inverse-CDF draw of a rank mapped through the permutation.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let rank = self.cdf.partition_point(|&c| c <= u).min(self.cdf.len() - 1);
        self.permutation[rank]
    }

    /// Probability of each event code (not rank).
    pub fn event_pmf(&self) -> Vec<f64> {
        let mut pmf = vec![0.0; self.permutation.len()];
        let mut prev = 0.0;
        for (rank, &c) in self.cdf.iter().enumerate() {
            pmf[self.permutation[rank]] = c - prev;
            prev = c;
        }
        pmf
    }
}

/// One uniformly random permutation and Zipf law per group.
pub fn build_group_models<R: Rng + ?Sized>(config: &SynthConfig, rng: &mut R) -> Result<Vec<GroupModel>, SynthError> {
    config.validate()?;
    config
        .betas
        .iter()
        .map(|&beta| {
            let mut permutation: Vec<usize> = (0..config.vocab_size).collect();
            permutation.shuffle(rng);
            Ok(GroupModel::new(permutation, &zipf_pmf(beta, config.vocab_size)?))
        })
        .collect()
}

/// Group for the next event: with probability `alpha` a fresh uniform draw
/// (possibly equal to `prev`), otherwise `prev`.
pub fn next_group<R: Rng + ?Sized>(prev: usize, config: &SynthConfig, rng: &mut R) -> usize {
    let q: f64 = rng.random();
    if q < config.alpha {
        rng.random_range(0..config.group_count)
    } else {
        prev
    }
}

/// Generates one patient sequence from an already seeded stream.
pub fn generate_patient<R: Rng + ?Sized>(
    id: String,
    models: &[GroupModel],
    config: &SynthConfig,
    rng: &mut R,
) -> PatientSequence {
    let mut events = Vec::with_capacity(config.seq_len);
    let mut groups = Vec::with_capacity(config.seq_len);
    let mut g = rng.random_range(0..config.group_count);
    for i in 0..config.seq_len {
        if i > 0 {
            g = next_group(g, config, rng);
        }
        groups.push(g);
        events.push(models[g].sample(rng));
    }
    PatientSequence { patient_id: id, events, categories: None, groups: Some(groups) }
}

/// Stream for patient `index` under `seed`.
pub fn patient_rng(seed: u64, index: usize) -> CaseRng {
    rng::derive(rng::mix(seed.wrapping_add(stream::PATIENTS)), index as u64)
}

/// Full synthetic dataset. Group models come from the `GROUP_MODELS` stream
/// of `config.seed`; each patient has its own derived stream.
pub fn generate_dataset(config: &SynthConfig) -> Result<(EventDataset, Vec<GroupModel>), SynthError> {
    let models = build_group_models(config, &mut rng::derive(config.seed, stream::GROUP_MODELS))?;
    let patients = (0..config.patients)
        .map(|i| generate_patient(format!("p{:05}", i), &models, config, &mut patient_rng(config.seed, i)))
        .collect();
    let dataset = EventDataset {
        patients,
        vocab_size: config.vocab_size,
        category_vocab_size: None,
        group_count: Some(config.group_count),
    };
    Ok((dataset, models))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zipf_reference_values() {
        assert_eq!(zipf_pmf(3.0, 1).unwrap(), vec![1.0]);
        let expected = [0.6832, 0.1708, 0.0759, 0.0427, 0.0273];
        for (p, e) in zipf_pmf(2.0, 5).unwrap().iter().zip(expected) {
            assert!((p - e).abs() < 1e-4, "{p} vs {e}");
        }
        let pmf = zipf_pmf(1.3, 50).unwrap();
        assert!(pmf.windows(2).all(|w| w[0] >= w[1]));
        assert!((pmf.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zipf_rejects_bad_input() {
        assert!(zipf_pmf(0.0, 4).is_err());
        assert!(zipf_pmf(-1.0, 4).is_err());
        assert!(zipf_pmf(2.0, 0).is_err());
    }

    #[test]
    fn config_validation() {
        let mut c = SynthConfig::default();
        assert!(c.validate().is_ok());
        c.alpha = 1.5;
        assert!(c.validate().is_err());
        let mut c = SynthConfig::default();
        c.betas.pop();
        assert!(c.validate().is_err());
        let mut c = SynthConfig::default();
        c.group_count = 0;
        c.betas.clear();
        assert!(c.validate().is_err());
    }

    #[test]
    fn single_event_vocabulary_gives_identity() {
        let c = SynthConfig::uniform_beta(1, 3, 0.1, 2.0, 2, 10, 4);
        let models = build_group_models(&c, &mut rng::seeded(1)).unwrap();
        assert!(models.iter().all(|m| m.permutation == vec![0]));
        assert_eq!(models[0].cdf, vec![1.0]);
    }

    #[test]
    fn group_models_are_bijections_with_valid_cdf() {
        let c = SynthConfig::uniform_beta(40, 5, 0.1, 1.5, 1, 1, 9);
        for m in build_group_models(&c, &mut rng::seeded(2)).unwrap() {
            let mut sorted = m.permutation.clone();
            sorted.sort_unstable();
            assert_eq!(sorted, (0..40).collect::<Vec<_>>());
            assert!(m.cdf.windows(2).all(|w| w[0] <= w[1]));
            assert!((m.cdf[39] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn next_group_extremes() {
        let mut c = SynthConfig::default();
        c.alpha = 0.0;
        let mut r = rng::seeded(5);
        assert!((0..1000).all(|_| next_group(3, &c, &mut r) == 3));
        c.alpha = 1.0;
        let mut counts = [0usize; 6];
        for _ in 0..60_000 {
            counts[next_group(3, &c, &mut r)] += 1;
        }
        assert!(counts.iter().all(|&n| (n as f64 / 60_000.0 - 1.0 / 6.0).abs() < 0.01), "{counts:?}");
    }

    #[test]
    fn single_group_dataset() {
        let c = SynthConfig::uniform_beta(20, 1, 0.5, 2.0, 3, 50, 1);
        let (ds, _) = generate_dataset(&c).unwrap();
        assert!(ds.patients.iter().all(|p| p.groups.as_ref().unwrap().iter().all(|&g| g == 0)));
        ds.validate().unwrap();
    }

    #[test]
    fn same_seed_same_dataset() {
        let c = SynthConfig::uniform_beta(30, 4, 0.05, 2.0, 5, 200, 77);
        let (a, ma) = generate_dataset(&c).unwrap();
        let (b, mb) = generate_dataset(&c).unwrap();
        assert_eq!(a, b);
        assert_eq!(ma, mb);
        let mut other = c.clone();
        other.seed = 78;
        assert_ne!(generate_dataset(&other).unwrap().0, a);
    }

    #[test]
    fn expected_run_length_formula() {
        let c = SynthConfig::uniform_beta(100, 6, 0.03, 2.0, 1, 1, 0);
        assert!((c.expected_run_length() - 40.0).abs() < 1e-9);
    }
}
