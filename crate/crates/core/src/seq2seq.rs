//! Transformer autoencoder over windows of event encodings.
//!
//! The encoder sees a window of `L` event encodings plus a sinusoidal
//! positional table and produces one vector per position; those vectors are
//! the event representations. The decoder reconstructs the window from them.
//! Blocks are pre-norm: `x + f(LayerNorm(x))`.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::cat2vec::{Cat2Vec, Cat2VecError, TrainReport};
use crate::dataset::EventDataset;
use crate::encoded::EncodedEvents;
use crate::numcore::{
    glorot_uniform, AdamConfig, AdamState, ConvergenceRule, ConvergenceTracker, Graph, NodeId, NumError, ParamStore,
    Tensor,
};
use crate::rng::{self, stream};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum Seq2SeqError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("no training windows")]
    EmptyCorpus,
    #[error("window has shape {got:?}, expected [{rows}, {cols}]")]
    WindowShape { got: Vec<usize>, rows: usize, cols: usize },
    #[error("parameter {name} has shape {got:?}, expected {expected:?}")]
    ParamShape { name: String, expected: Vec<usize>, got: Vec<usize> },
    #[error("unsupported artifact version {0}")]
    Version(u32),
    #[error("stride must lie in 1..={window_len}, got {stride}")]
    Stride { stride: usize, window_len: usize },
    #[error(transparent)]
    Cat2Vec(#[from] Cat2VecError),
    #[error(transparent)]
    Num(#[from] NumError),
}

/// What the decoder receives as its own (target-side) input.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DecoderInput {
    /// Only the positional table; every bit of content must pass through
    /// the encoder output.
    #[default]
    Positional,
    /// The input window itself plus positions, unmasked.
    Input,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TransformerConfig {
    pub d_model: usize,
    pub heads: usize,
    pub window_len: usize,
    pub ff_dim: usize,
    pub encoder_layers: usize,
    pub decoder_layers: usize,
    pub decoder_input: DecoderInput,
    /// Add the positional table to encoder and decoder inputs.
    pub positional: bool,
    /// Windows per optimizer step.
    pub batch_size: usize,
    /// Offset between consecutive training windows.
    pub train_stride: usize,
    pub adam: AdamConfig,
    pub convergence: ConvergenceRule,
    pub seed: u64,
}

impl Default for TransformerConfig {
    fn default() -> Self {
        Self {
            d_model: 8,
            heads: 8,
            window_len: 64,
            ff_dim: 64,
            encoder_layers: 4,
            decoder_layers: 1,
            decoder_input: DecoderInput::Positional,
            positional: true,
            batch_size: 16,
            train_stride: 64,
            adam: AdamConfig::default(),
            convergence: ConvergenceRule::default(),
            seed: 0,
        }
    }
}

impl TransformerConfig {
    pub fn validate(&self) -> Result<(), Seq2SeqError> {
        let fail = |m: &str| Err(Seq2SeqError::Config(m.into()));
        if self.d_model == 0 || self.heads == 0 || self.d_model % self.heads != 0 {
            return fail("d_model must be a positive multiple of heads");
        }
        if self.d_model % 2 != 0 {
            return fail("d_model must be even for the positional table");
        }
        if self.window_len == 0 || self.ff_dim == 0 || self.batch_size == 0 {
            return fail("window_len, ff_dim and batch_size must be positive");
        }
        if self.encoder_layers == 0 || self.decoder_layers == 0 {
            return fail("encoder_layers and decoder_layers must be at least 1");
        }
        if self.train_stride == 0 || self.train_stride > self.window_len {
            return fail("train_stride must lie in 1..=window_len");
        }
        Ok(())
    }

    fn param_shapes(&self) -> Vec<(String, Vec<usize>)> {
        let (d, f) = (self.d_model, self.ff_dim);
        let mut out: Vec<(String, Vec<usize>)> = Vec::new();
        let norm = |out: &mut Vec<(String, Vec<usize>)>, p: String| {
            out.push((format!("{p}.g"), vec![d]));
            out.push((format!("{p}.b"), vec![d]));
        };
        let linear = |out: &mut Vec<(String, Vec<usize>)>, p: String, i: usize, o: usize| {
            out.push((format!("{p}.w"), vec![i, o]));
            out.push((format!("{p}.b"), vec![o]));
        };
        let attention = |out: &mut Vec<(String, Vec<usize>)>, p: &str| {
            for m in ["q", "k", "v", "o"] {
                linear(out, format!("{p}.{m}"), d, d);
            }
        };
        for l in 0..self.encoder_layers {
            norm(&mut out, format!("enc.{l}.ln1"));
            attention(&mut out, &format!("enc.{l}.attn"));
            norm(&mut out, format!("enc.{l}.ln2"));
            linear(&mut out, format!("enc.{l}.ff1"), d, f);
            linear(&mut out, format!("enc.{l}.ff2"), f, d);
        }
        norm(&mut out, "enc.ln".into());
        for l in 0..self.decoder_layers {
            norm(&mut out, format!("dec.{l}.ln1"));
            attention(&mut out, &format!("dec.{l}.self"));
            norm(&mut out, format!("dec.{l}.ln2"));
            attention(&mut out, &format!("dec.{l}.cross"));
            norm(&mut out, format!("dec.{l}.ln3"));
            linear(&mut out, format!("dec.{l}.ff1"), d, f);
            linear(&mut out, format!("dec.{l}.ff2"), f, d);
        }
        // no norm before the head: a normalized row cannot reach arbitrary targets
        linear(&mut out, "head".into(), d, d);
        out
    }
}

/// Sinusoidal table: `PE(p, 2i) = sin(p / 10000^(2i/d))`, `PE(p, 2i+1) = cos(·)`.
pub fn positional_encoding(len: usize, d_model: usize) -> Result<Tensor, Seq2SeqError> {
    if d_model % 2 != 0 {
        return Err(Seq2SeqError::Config(format!("positional table needs an even width, got {d_model}")));
    }
    let mut data = vec![0.0; len * d_model];
    for pos in 0..len {
        for i in 0..d_model / 2 {
            let angle = pos as f64 / 10000f64.powf(2.0 * i as f64 / d_model as f64);
            data[pos * d_model + 2 * i] = angle.sin();
            data[pos * d_model + 2 * i + 1] = angle.cos();
        }
    }
    Ok(Tensor::new(vec![len, d_model], data).expect("sized above"))
}

/// Start offsets of the windows over a sequence of length `n`: every
/// `stride` events, plus one window flush with the end when the last
/// regular window stops short. Empty when `n < len`.
pub fn window_starts(n: usize, len: usize, stride: usize) -> Vec<usize> {
    if n < len || stride == 0 {
        return Vec::new();
    }
    let mut starts: Vec<usize> = (0..=n - len).step_by(stride).collect();
    if starts.last().is_some_and(|&s| s + len < n) {
        starts.push(n - len);
    }
    starts
}

/// Attention probabilities recorded while encoding one window.
#[derive(Clone, Debug)]
pub struct EncoderTrace {
    pub omega: Tensor,
    /// `[layer][head]`, each `L × L`.
    pub attention: Vec<Vec<Tensor>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Seq2Seq {
    pub format_version: u32,
    pub config: TransformerConfig,
    pub params: ParamStore,
}

struct Leaves {
    ids: Vec<NodeId>,
    by_name: HashMap<String, usize>,
}

impl Leaves {
    fn get(&self, name: &str) -> NodeId {
        self.ids[self.by_name[name]]
    }
}

impl Seq2Seq {
    pub fn init(config: TransformerConfig) -> Result<Self, Seq2SeqError> {
        config.validate()?;
        let mut r = rng::derive(config.seed, stream::SEQ2SEQ);
        let mut params = ParamStore::new();
        for (name, shape) in config.param_shapes() {
            let t = if shape.len() == 2 {
                glorot_uniform(shape[0], shape[1], &mut r)
            } else if name.ends_with(".g") {
                Tensor::full(&shape, 1.0)
            } else {
                Tensor::zeros(&shape)
            };
            params.add(name, t);
        }
        Ok(Self { format_version: FORMAT_VERSION, config, params })
    }

    pub fn validate(&self) -> Result<(), Seq2SeqError> {
        if self.format_version != FORMAT_VERSION {
            return Err(Seq2SeqError::Version(self.format_version));
        }
        self.config.validate()?;
        let expected = self.config.param_shapes();
        if expected.len() != self.params.len() {
            return Err(Seq2SeqError::Config(format!("{} parameters, expected {}", self.params.len(), expected.len())));
        }
        for (i, (name, shape)) in expected.into_iter().enumerate() {
            let t = &self.params.tensors()[i];
            if self.params.name(crate::numcore::ParamId(i)) != name || t.shape() != shape.as_slice() {
                return Err(Seq2SeqError::ParamShape { name, expected: shape, got: t.shape().to_vec() });
            }
        }
        if !self.params.all_finite() {
            return Err(NumError::NonFinite { op: "load" }.into());
        }
        Ok(())
    }

    fn leaves(&self, ids: &[NodeId]) -> Leaves {
        let by_name = (0..self.params.len()).map(|i| (self.params.name(crate::numcore::ParamId(i)).to_string(), i)).collect();
        Leaves { ids: ids.to_vec(), by_name }
    }

    fn check_window(&self, w: &Tensor) -> Result<(), Seq2SeqError> {
        let (l, d) = (self.config.window_len, self.config.d_model);
        if w.shape() != [l, d] {
            return Err(Seq2SeqError::WindowShape { got: w.shape().to_vec(), rows: l, cols: d });
        }
        Ok(())
    }

    fn linear(g: &mut Graph<'_>, p: &Leaves, x: NodeId, name: &str) -> Result<NodeId, NumError> {
        let y = g.matmul(x, p.get(&format!("{name}.w")))?;
        g.add(y, p.get(&format!("{name}.b")))
    }

    fn norm(g: &mut Graph<'_>, p: &Leaves, x: NodeId, name: &str) -> Result<NodeId, NumError> {
        g.layer_norm(x, p.get(&format!("{name}.g")), p.get(&format!("{name}.b")))
    }

    fn attention(
        &self,
        g: &mut Graph<'_>,
        p: &Leaves,
        queries: NodeId,
        context: NodeId,
        name: &str,
        probs: Option<&mut Vec<NodeId>>,
    ) -> Result<NodeId, NumError> {
        let heads = self.config.heads;
        let dk = self.config.d_model / heads;
        let q = Self::linear(g, p, queries, &format!("{name}.q"))?;
        let k = Self::linear(g, p, context, &format!("{name}.k"))?;
        let v = Self::linear(g, p, context, &format!("{name}.v"))?;
        let scale = 1.0 / (dk as f64).sqrt();
        let mut outs = Vec::with_capacity(heads);
        let mut recorded = Vec::new();
        for h in 0..heads {
            let (s, e) = (h * dk, (h + 1) * dk);
            let (qh, kh, vh) = if heads == 1 {
                (q, k, v)
            } else {
                (g.slice_cols(q, s, e)?, g.slice_cols(k, s, e)?, g.slice_cols(v, s, e)?)
            };
            let scores = g.matmul_nt(qh, kh)?;
            let scores = g.scale(scores, scale)?;
            let weights = g.softmax_rows(scores)?;
            recorded.push(weights);
            outs.push(g.matmul(weights, vh)?);
        }
        if let Some(pr) = probs {
            pr.extend(recorded);
        }
        let joined = if heads == 1 { outs[0] } else { g.concat_cols(&outs)? };
        Self::linear(g, p, joined, &format!("{name}.o"))
    }

    fn feed_forward(g: &mut Graph<'_>, p: &Leaves, x: NodeId, prefix: &str) -> Result<NodeId, NumError> {
        let h = Self::linear(g, p, x, &format!("{prefix}.ff1"))?;
        let h = g.relu(h)?;
        Self::linear(g, p, h, &format!("{prefix}.ff2"))
    }

    fn encoder(
        &self,
        g: &mut Graph<'_>,
        p: &Leaves,
        window: NodeId,
        pe: NodeId,
        mut probs: Option<&mut Vec<NodeId>>,
    ) -> Result<NodeId, NumError> {
        let mut x = if self.config.positional { g.add(window, pe)? } else { window };
        for l in 0..self.config.encoder_layers {
            let n = Self::norm(g, p, x, &format!("enc.{l}.ln1"))?;
            let a = self.attention(g, p, n, n, &format!("enc.{l}.attn"), probs.as_deref_mut())?;
            x = g.add(x, a)?;
            let n = Self::norm(g, p, x, &format!("enc.{l}.ln2"))?;
            let f = Self::feed_forward(g, p, n, &format!("enc.{l}"))?;
            x = g.add(x, f)?;
        }
        Self::norm(g, p, x, "enc.ln")
    }

    fn decoder(&self, g: &mut Graph<'_>, p: &Leaves, omega: NodeId, window: NodeId, pe: NodeId) -> Result<NodeId, NumError> {
        let mut t = match self.config.decoder_input {
            DecoderInput::Positional => pe,
            DecoderInput::Input if self.config.positional => g.add(window, pe)?,
            DecoderInput::Input => window,
        };
        for l in 0..self.config.decoder_layers {
            let n = Self::norm(g, p, t, &format!("dec.{l}.ln1"))?;
            let a = self.attention(g, p, n, n, &format!("dec.{l}.self"), None)?;
            t = g.add(t, a)?;
            let n = Self::norm(g, p, t, &format!("dec.{l}.ln2"))?;
            let c = self.attention(g, p, n, omega, &format!("dec.{l}.cross"), None)?;
            t = g.add(t, c)?;
            let n = Self::norm(g, p, t, &format!("dec.{l}.ln3"))?;
            let f = Self::feed_forward(g, p, n, &format!("dec.{l}"))?;
            t = g.add(t, f)?;
        }
        Self::linear(g, p, t, "head")
    }

    fn pe_tensor(&self) -> Tensor {
        if self.config.positional {
            positional_encoding(self.config.window_len, self.config.d_model).expect("validated width")
        } else {
            Tensor::zeros(&[self.config.window_len, self.config.d_model])
        }
    }

    /// Mean reconstruction error over `windows`, recorded on `g` with the
    /// parameter leaves `ids` (in storage order).
    pub fn reconstruction_loss<'a>(
        &self,
        g: &mut Graph<'a>,
        ids: &[NodeId],
        windows: &'a [Tensor],
    ) -> Result<NodeId, Seq2SeqError> {
        if windows.is_empty() {
            return Err(Seq2SeqError::EmptyCorpus);
        }
        let p = self.leaves(ids);
        let pe = g.constant(self.pe_tensor());
        let mut total: Option<NodeId> = None;
        for w in windows {
            self.check_window(w)?;
            let x = g.constant_ref(w);
            let omega = self.encoder(g, &p, x, pe, None)?;
            let y = self.decoder(g, &p, omega, x, pe)?;
            let l = g.mse(y, x)?;
            total = Some(match total {
                Some(t) => g.add(t, l)?,
                None => l,
            });
        }
        Ok(g.scale(total.expect("non-empty"), 1.0 / windows.len() as f64)?)
    }

    /// Encoder output ω for one `L × d_model` window.
    pub fn encode_window(&self, window: &Tensor) -> Result<Tensor, Seq2SeqError> {
        Ok(self.trace_window(window)?.omega)
    }

    /// Encoder output together with every attention matrix.
    pub fn trace_window(&self, window: &Tensor) -> Result<EncoderTrace, Seq2SeqError> {
        self.check_window(window)?;
        let mut g = Graph::new();
        let ids: Vec<NodeId> = self.params.tensors().iter().map(|t| g.constant_ref(t)).collect();
        let p = self.leaves(&ids);
        let pe = g.constant(self.pe_tensor());
        let x = g.constant_ref(window);
        let mut probs = Vec::new();
        let omega = self.encoder(&mut g, &p, x, pe, Some(&mut probs))?;
        let heads = self.config.heads;
        let attention = probs.chunks(heads).map(|c| c.iter().map(|&n| g.value(n).clone()).collect()).collect();
        Ok(EncoderTrace { omega: g.value(omega).clone(), attention })
    }

    /// Decoder output for encoder output `omega`. `window` is only read in
    /// [`DecoderInput::Input`] mode.
    pub fn reconstruct(&self, omega: &Tensor, window: &Tensor) -> Result<Tensor, Seq2SeqError> {
        self.check_window(omega)?;
        self.check_window(window)?;
        let mut g = Graph::new();
        let ids: Vec<NodeId> = self.params.tensors().iter().map(|t| g.constant_ref(t)).collect();
        let p = self.leaves(&ids);
        let pe = g.constant(self.pe_tensor());
        let (o, x) = (g.constant_ref(omega), g.constant_ref(window));
        let y = self.decoder(&mut g, &p, o, x, pe)?;
        Ok(g.value(y).clone())
    }

    /// Mean reconstruction error of `windows` under the current parameters.
    pub fn evaluate(&self, windows: &[Tensor]) -> Result<f64, Seq2SeqError> {
        let mut g = Graph::new();
        let ids: Vec<NodeId> = self.params.tensors().iter().map(|t| g.constant_ref(t)).collect();
        let l = self.reconstruction_loss(&mut g, &ids, windows)?;
        Ok(g.value(l).item().expect("scalar"))
    }

    /// Adam on the reconstruction error with shuffled mini-batches of windows.
    pub fn train(&mut self, windows: &[Tensor]) -> Result<TrainReport, Seq2SeqError> {
        if windows.is_empty() {
            return Err(Seq2SeqError::EmptyCorpus);
        }
        for w in windows {
            self.check_window(w)?;
        }
        let cfg = self.config.clone();
        let mut r = rng::derive(cfg.seed ^ 0x5eed, stream::SEQ2SEQ);
        let mut adam = AdamState::new(cfg.adam, self.params.tensors())?;
        let mut tracker = ConvergenceTracker::new(cfg.convergence);
        let mut order: Vec<usize> = (0..windows.len()).collect();
        let mut losses = Vec::new();
        loop {
            order.shuffle(&mut r);
            let mut epoch = 0.0;
            for batch in order.chunks(cfg.batch_size) {
                let picked: Vec<Tensor> = batch.iter().map(|&i| windows[i].clone()).collect();
                let mut g = Graph::new();
                let ids: Vec<NodeId> = self.params.tensors().iter().map(|t| g.param(t)).collect();
                let loss = self.reconstruction_loss(&mut g, &ids, &picked)?;
                let value = g.value(loss).item().expect("scalar");
                let mut grads = g.backward(loss)?;
                let grads: Vec<Option<Tensor>> = ids.iter().map(|&id| grads.take(id)).collect();
                drop(g);
                adam.step(self.params.tensors_mut(), &grads)?;
                epoch += value * batch.len() as f64;
            }
            let mean = epoch / windows.len() as f64;
            losses.push(mean);
            log::debug!("seq2seq epoch {} loss {:.6e}", losses.len(), mean);
            if tracker.observe(mean) {
                break;
            }
        }
        Ok(TrainReport { losses })
    }

    /// Per-event representations: windows slide over every sequence with
    /// `stride`, and each event's vector is the mean of its encoder outputs
    /// over all covering windows. Sequences shorter than the window are
    /// skipped, so their events are absent from the result.
    pub fn event_representations(&self, inputs: &EncodedEvents, stride: usize) -> Result<EncodedEvents, Seq2SeqError> {
        let (l, d) = (self.config.window_len, self.config.d_model);
        if stride == 0 || stride > l {
            return Err(Seq2SeqError::Stride { stride, window_len: l });
        }
        if inputs.dim != d {
            return Err(Seq2SeqError::WindowShape { got: vec![l, inputs.dim], rows: l, cols: d });
        }
        let (mut ids, mut positions, mut data) = (Vec::new(), Vec::new(), Vec::new());
        for (start, end) in sequence_ranges(inputs) {
            let n = end - start;
            let starts = window_starts(n, l, stride);
            if starts.is_empty() {
                continue;
            }
            let mut sums = vec![0.0; n * d];
            let mut counts = vec![0usize; n];
            for s in starts {
                let w = Tensor::new(vec![l, d], inputs.data[(start + s) * d..(start + s + l) * d].to_vec())
                    .expect("window slice");
                let omega = self.encode_window(&w)?;
                for (k, row) in omega.data().chunks(d).enumerate() {
                    counts[s + k] += 1;
                    for (acc, v) in sums[(s + k) * d..(s + k + 1) * d].iter_mut().zip(row) {
                        *acc += v;
                    }
                }
            }
            for i in 0..n {
                ids.push(inputs.patient_ids[start + i].clone());
                positions.push(inputs.positions[start + i]);
                data.extend(sums[i * d..(i + 1) * d].iter().map(|v| v / counts[i] as f64));
            }
        }
        Ok(EncodedEvents::new(ids, positions, d, data).expect("one row per covered event"))
    }
}

/// Contiguous row ranges sharing a patient id.
pub fn sequence_ranges(events: &EncodedEvents) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = 0;
    for i in 1..=events.len() {
        if i == events.len() || events.patient_ids[i] != events.patient_ids[start] {
            if i > start {
                out.push((start, i));
            }
            start = i;
        }
    }
    out
}

/// Training windows (`L × d`) cut from per-event encodings with `stride`.
pub fn training_windows(inputs: &EncodedEvents, window_len: usize, stride: usize) -> Vec<Tensor> {
    let d = inputs.dim;
    let mut out = Vec::new();
    for (start, end) in sequence_ranges(inputs) {
        for s in window_starts(end - start, window_len, stride) {
            let a = (start + s) * d;
            out.push(Tensor::new(vec![window_len, d], inputs.data[a..a + window_len * d].to_vec()).expect("slice"));
        }
    }
    out
}

/// Cat2Vec encodings of `dataset` followed by Seq2Seq representations.
pub fn represent(
    dataset: &EventDataset,
    cat2vec: &Cat2Vec,
    seq2seq: &Seq2Seq,
    stride: usize,
) -> Result<EncodedEvents, Seq2SeqError> {
    let enc = cat2vec.encode_dataset(dataset)?;
    seq2seq.event_representations(&enc, stride)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn positional_reference_values() {
        let pe = positional_encoding(3, 4).unwrap();
        assert_eq!(pe.row(0), &[0.0, 1.0, 0.0, 1.0]);
        assert!((pe.get(1, 0) - 0.8414709848078965).abs() < 1e-12);
        assert!(pe.data().iter().all(|v| (-1.0..=1.0).contains(v)));
        assert!(positional_encoding(3, 5).is_err());
    }

    #[test]
    fn window_start_rule() {
        assert_eq!(window_starts(10, 4, 4), vec![0, 4, 6]);
        assert_eq!(window_starts(8, 4, 4), vec![0, 4]);
        assert_eq!(window_starts(3, 4, 1), Vec::<usize>::new());
        assert_eq!(window_starts(6, 4, 1), vec![0, 1, 2]);
    }

    #[test]
    fn config_validation() {
        assert!(TransformerConfig { heads: 3, ..TransformerConfig::default() }.validate().is_err());
        assert!(TransformerConfig { train_stride: 65, ..TransformerConfig::default() }.validate().is_err());
        Seq2Seq::init(TransformerConfig::default()).unwrap().validate().unwrap();
    }
}
