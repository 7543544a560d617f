//! Sliding-window topic-model baseline.
//!
//! Every patient sequence is cut into overlapping windows; each window is a
//! bag of events (a document). A collapsed Gibbs sampler fits the topic
//! model, each window takes its most likely topic, and each event inherits
//! the modal topic of the windows that cover it.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::clusterer::{LabelAssignment, NOISE};
use crate::dataset::EventDataset;
use crate::numcore::Tensor;
use crate::rng::{self, stream};

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum LdaError {
    #[error("corpus has no windows")]
    EmptyCorpus,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("dataset has no ground-truth groups")]
    NoGroups,
    #[error("{labels} window labels for {windows} windows")]
    LengthMismatch { labels: usize, windows: usize },
}

/// One window: `len` consecutive events of `patient` starting at `start`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowSpan {
    pub patient: usize,
    pub start: usize,
    pub len: usize,
}

/// Windows over a dataset together with their event tokens.
#[derive(Clone, Debug, PartialEq)]
pub struct WindowCorpus {
    pub spans: Vec<WindowSpan>,
    /// Event codes of every window, concatenated; window `w` owns
    /// `tokens[w * window_len..(w + 1) * window_len]`.
    pub tokens: Vec<usize>,
    pub window_len: usize,
    pub vocab_size: usize,
    /// Length of each patient sequence, for mapping back to events.
    pub sequence_lens: Vec<usize>,
    /// Patients too short for a single window.
    pub skipped: usize,
}

impl WindowCorpus {
    pub fn len(&self) -> usize {
        self.spans.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spans.is_empty()
    }

    pub fn window_tokens(&self, w: usize) -> &[usize] {
        &self.tokens[w * self.window_len..(w + 1) * self.window_len]
    }

    /// Event frequencies of window `w` over the whole vocabulary.
    pub fn count_vector(&self, w: usize) -> Vec<usize> {
        let mut counts = vec![0; self.vocab_size];
        for &e in self.window_tokens(w) {
            counts[e] += 1;
        }
        counts
    }

    /// Number of windows covering each event, patient-major.
    pub fn coverage(&self) -> Vec<Vec<usize>> {
        let mut cov: Vec<Vec<usize>> = self.sequence_lens.iter().map(|&n| vec![0; n]).collect();
        for s in &self.spans {
            for c in &mut cov[s.patient][s.start..s.start + s.len] {
                *c += 1;
            }
        }
        cov
    }
}

pub fn make_windows(dataset: &EventDataset, window_len: usize, stride: usize) -> Result<WindowCorpus, LdaError> {
    if window_len == 0 || stride == 0 {
        return Err(LdaError::Config("window_len and stride must be positive".into()));
    }
    let mut spans = Vec::new();
    let mut tokens = Vec::new();
    let mut skipped = 0;
    for (pi, p) in dataset.patients.iter().enumerate() {
        if p.len() < window_len {
            skipped += 1;
            continue;
        }
        for start in (0..=p.len() - window_len).step_by(stride) {
            spans.push(WindowSpan { patient: pi, start, len: window_len });
            tokens.extend_from_slice(&p.events[start..start + window_len]);
        }
    }
    if skipped > 0 {
        log::warn!("{skipped} sequences shorter than {window_len} events produced no windows");
    }
    Ok(WindowCorpus {
        spans,
        tokens,
        window_len,
        vocab_size: dataset.vocab_size,
        sequence_lens: dataset.patients.iter().map(|p| p.len()).collect(),
        skipped,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LdaConfig {
    pub topics: usize,
    /// Symmetric document-topic prior; `None` means `1 / topics`.
    pub alpha: Option<f64>,
    /// Symmetric topic-word prior.
    pub beta: f64,
    pub iterations: usize,
    pub burn_in: usize,
    pub window_len: usize,
    pub stride: usize,
    pub seed: u64,
}

impl Default for LdaConfig {
    fn default() -> Self {
        Self { topics: 6, alpha: None, beta: 0.1, iterations: 1000, burn_in: 200, window_len: 32, stride: 1, seed: 0 }
    }
}

impl LdaConfig {
    pub fn alpha(&self) -> f64 {
        self.alpha.unwrap_or(1.0 / self.topics as f64)
    }

    pub fn validate(&self) -> Result<(), LdaError> {
        let fail = |m: &str| Err(LdaError::Config(m.into()));
        if self.topics == 0 {
            return fail("topics must be at least 1");
        }
        if !(self.alpha() > 0.0) || !(self.beta > 0.0) {
            return fail("priors must be positive");
        }
        if self.burn_in >= self.iterations {
            return fail("burn_in must be smaller than iterations");
        }
        if self.window_len == 0 || self.stride == 0 {
            return fail("window_len and stride must be positive");
        }
        Ok(())
    }
}

/// Fitted topic model; matrices are row-normalized posterior means.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LdaModel {
    pub topics: usize,
    pub vocab_size: usize,
    pub alpha: f64,
    pub beta: f64,
    /// `topics × vocab_size`.
    pub topic_word: Tensor,
    /// `windows × topics`.
    pub doc_topic: Tensor,
    pub iterations: usize,
    pub burn_in: usize,
}

/// Collapsed Gibbs sampling over token topic assignments. The returned
/// matrices come from counts averaged over every post-burn-in sweep.
pub fn fit(corpus: &WindowCorpus, config: &LdaConfig) -> Result<LdaModel, LdaError> {
    config.validate()?;
    if corpus.is_empty() {
        return Err(LdaError::EmptyCorpus);
    }
    let k = config.topics;
    let v = corpus.vocab_size;
    let wl = corpus.window_len;
    let docs = corpus.len();
    let (alpha, beta) = (config.alpha(), config.beta);
    let vbeta = v as f64 * beta;
    let mut r = rng::derive(config.seed, stream::LDA);

    let mut z: Vec<usize> = (0..corpus.tokens.len()).map(|_| r.random_range(0..k)).collect();
    let mut n_dk = vec![0u32; docs * k];
    let mut n_kw = vec![0u32; k * v];
    let mut n_k = vec![0u32; k];
    for (t, (&w, &topic)) in corpus.tokens.iter().zip(&z).enumerate() {
        n_dk[(t / wl) * k + topic] += 1;
        n_kw[topic * v + w] += 1;
        n_k[topic] += 1;
    }

    let mut acc_dk = vec![0.0; docs * k];
    let mut acc_kw = vec![0.0; k * v];
    let mut weights = vec![0.0; k];
    for iter in 0..config.iterations {
        for (t, &w) in corpus.tokens.iter().enumerate() {
            let d = t / wl;
            let old = z[t];
            n_dk[d * k + old] -= 1;
            n_kw[old * v + w] -= 1;
            n_k[old] -= 1;
            let mut total = 0.0;
            for topic in 0..k {
                total += (n_dk[d * k + topic] as f64 + alpha) * (n_kw[topic * v + w] as f64 + beta)
                    / (n_k[topic] as f64 + vbeta);
                weights[topic] = total;
            }
            let u = r.random::<f64>() * total;
            let new = weights.partition_point(|&c| c <= u).min(k - 1);
            z[t] = new;
            n_dk[d * k + new] += 1;
            n_kw[new * v + w] += 1;
            n_k[new] += 1;
        }
        if iter >= config.burn_in {
            for (a, &c) in acc_dk.iter_mut().zip(&n_dk) {
                *a += c as f64;
            }
            for (a, &c) in acc_kw.iter_mut().zip(&n_kw) {
                *a += c as f64;
            }
        }
    }

    let samples = (config.iterations - config.burn_in) as f64;
    let mut doc_topic = Vec::with_capacity(docs * k);
    for d in 0..docs {
        let row = &acc_dk[d * k..(d + 1) * k];
        let denom: f64 = row.iter().map(|c| c / samples + alpha).sum();
        doc_topic.extend(row.iter().map(|c| (c / samples + alpha) / denom));
    }
    let mut topic_word = Vec::with_capacity(k * v);
    for topic in 0..k {
        let row = &acc_kw[topic * v..(topic + 1) * v];
        let denom: f64 = row.iter().map(|c| c / samples + beta).sum();
        topic_word.extend(row.iter().map(|c| (c / samples + beta) / denom));
    }
    Ok(LdaModel {
        topics: k,
        vocab_size: v,
        alpha,
        beta,
        topic_word: Tensor::new(vec![k, v], topic_word).expect("sized above"),
        doc_topic: Tensor::new(vec![docs, k], doc_topic).expect("sized above"),
        iterations: config.iterations,
        burn_in: config.burn_in,
    })
}

/// Index of the largest entry; the lowest index wins ties.
pub fn argmax_lowest(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in values.iter().enumerate() {
        if x > values[best] {
            best = i;
        }
    }
    best
}

/// Most likely topic of every window.
pub fn window_topics(model: &LdaModel) -> Vec<usize> {
    (0..model.doc_topic.rows()).map(|w| argmax_lowest(model.doc_topic.row(w))).collect()
}

/// Most frequent value among `counts` indices; the lowest wins ties.
fn mode_lowest(counts: &[usize]) -> usize {
    let mut best = 0;
    for (i, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = i;
        }
    }
    best
}

/// Per-event label (patient-major): the modal topic of the covering windows.
/// Events no window covers are noise.
pub fn event_labels(corpus: &WindowCorpus, window_labels: &[usize]) -> Result<LabelAssignment, LdaError> {
    if window_labels.len() != corpus.len() {
        return Err(LdaError::LengthMismatch { labels: window_labels.len(), windows: corpus.len() });
    }
    let k = window_labels.iter().max().map_or(1, |m| m + 1);
    let mut labels = Vec::with_capacity(corpus.sequence_lens.iter().sum());
    let mut votes: Vec<Vec<usize>> = corpus.sequence_lens.iter().map(|&n| vec![0; n * k]).collect();
    for (s, &l) in corpus.spans.iter().zip(window_labels) {
        for pos in s.start..s.start + s.len {
            votes[s.patient][pos * k + l] += 1;
        }
    }
    for (pv, &n) in votes.iter().zip(&corpus.sequence_lens) {
        for pos in 0..n {
            let counts = &pv[pos * k..(pos + 1) * k];
            if counts.iter().all(|&c| c == 0) {
                labels.push(NOISE);
            } else {
                labels.push(mode_lowest(counts) as i64);
            }
        }
    }
    Ok(LabelAssignment::new(labels))
}

/// Majority true group of every window.
pub fn window_level_truth(corpus: &WindowCorpus, dataset: &EventDataset) -> Result<Vec<usize>, LdaError> {
    let g = dataset.group_count.ok_or(LdaError::NoGroups)?;
    let mut counts = vec![0; g];
    corpus
        .spans
        .iter()
        .map(|s| {
            let groups = dataset.patients[s.patient].groups.as_ref().ok_or(LdaError::NoGroups)?;
            counts.iter_mut().for_each(|c| *c = 0);
            for &x in &groups[s.start..s.start + s.len] {
                counts[x] += 1;
            }
            Ok(mode_lowest(&counts))
        })
        .collect()
}
