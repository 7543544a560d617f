//! Siamese encoder of one-hot categorical events.
//!
//! Each categorical field passes through its own ReLU layer; the hidden
//! activations are concatenated and mapped through a sigmoid layer to the
//! encoding. Training pulls the encodings of consecutive events of the same
//! patient together.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::EventDataset;
use crate::encoded::EncodedEvents;
use crate::numcore::{
    glorot_uniform, AdamConfig, AdamState, ConvergenceRule, ConvergenceTracker, Graph, NodeId, NumError, ParamStore,
    Tensor,
};
use crate::rng::{self, stream};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum Cat2VecError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("dataset has no patients")]
    EmptyDataset,
    #[error("patient {patient} has {len} events; pairs need at least 2")]
    ShortSequence { patient: String, len: usize },
    #[error("field {field}: {detail}")]
    NotOneHot { field: usize, detail: String },
    #[error("dataset has {got} categorical fields, model expects {expected}")]
    FieldCount { expected: usize, got: usize },
    #[error("parameter {name} has shape {got:?}, expected {expected:?}")]
    ParamShape { name: String, expected: Vec<usize>, got: Vec<usize> },
    #[error("unsupported artifact version {0}")]
    Version(u32),
    #[error(transparent)]
    Num(#[from] NumError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Cat2VecConfig {
    /// One-hot width of each categorical field.
    pub input_dims: Vec<usize>,
    /// Hidden width of each field's first layer.
    pub hidden_dim: usize,
    pub encoding_dim: usize,
    /// Weight of the optional repulsive term between random event pairs.
    pub contrastive_weight: f64,
    /// Squared-distance margin of the repulsive term.
    pub contrastive_margin: f64,
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub convergence: ConvergenceRule,
    pub seed: u64,
}

impl Default for Cat2VecConfig {
    fn default() -> Self {
        Self {
            input_dims: vec![100],
            hidden_dim: 8,
            encoding_dim: 8,
            contrastive_weight: 0.0,
            contrastive_margin: 1.0,
            batch_size: 256,
            adam: AdamConfig::default(),
            convergence: ConvergenceRule::default(),
            seed: 0,
        }
    }
}

impl Cat2VecConfig {
    pub fn validate(&self) -> Result<(), Cat2VecError> {
        let fail = |m: &str| Err(Cat2VecError::Config(m.into()));
        if self.input_dims.is_empty() || self.input_dims.contains(&0) {
            return fail("every field needs a positive input dimension");
        }
        if self.hidden_dim == 0 || self.encoding_dim == 0 || self.batch_size == 0 {
            return fail("hidden_dim, encoding_dim and batch_size must be positive");
        }
        if self.contrastive_weight < 0.0 {
            return fail("contrastive_weight must be non-negative");
        }
        Ok(())
    }

    /// Expected `(name, shape)` of every parameter, in storage order.
    fn param_shapes(&self) -> Vec<(String, Vec<usize>)> {
        let mut out = Vec::new();
        for (f, &d) in self.input_dims.iter().enumerate() {
            out.push((format!("l1.{f}.w"), vec![d, self.hidden_dim]));
            out.push((format!("l1.{f}.b"), vec![self.hidden_dim]));
        }
        out.push(("l2.w".into(), vec![self.hidden_dim * self.input_dims.len(), self.encoding_dim]));
        out.push(("l2.b".into(), vec![self.encoding_dim]));
        out
    }
}

/// Trained (or freshly initialised) encoder with its configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cat2Vec {
    pub format_version: u32,
    pub config: Cat2VecConfig,
    pub params: ParamStore,
}

/// Epoch-mean losses of a training run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub losses: Vec<f64>,
}

impl TrainReport {
    pub fn epochs(&self) -> usize {
        self.losses.len()
    }

    pub fn final_loss(&self) -> f64 {
        self.losses.last().copied().unwrap_or(f64::NAN)
    }
}

impl Cat2Vec {
    pub fn init(config: Cat2VecConfig) -> Result<Self, Cat2VecError> {
        config.validate()?;
        let mut r = rng::derive(config.seed, stream::CAT2VEC);
        let mut params = ParamStore::new();
        for (name, shape) in config.param_shapes() {
            let t = if shape.len() == 2 { glorot_uniform(shape[0], shape[1], &mut r) } else { Tensor::zeros(&shape) };
            params.add(name, t);
        }
        Ok(Self { format_version: FORMAT_VERSION, config, params })
    }

    /// Checks version and parameter shapes of a loaded artifact.
    pub fn validate(&self) -> Result<(), Cat2VecError> {
        if self.format_version != FORMAT_VERSION {
            return Err(Cat2VecError::Version(self.format_version));
        }
        self.config.validate()?;
        let expected = self.config.param_shapes();
        if expected.len() != self.params.len() {
            return Err(Cat2VecError::Config(format!(
                "{} parameters, expected {}",
                self.params.len(),
                expected.len()
            )));
        }
        for ((name, shape), t) in expected.into_iter().zip(self.params.tensors()) {
            if t.shape() != shape.as_slice() {
                return Err(Cat2VecError::ParamShape { name, expected: shape, got: t.shape().to_vec() });
            }
        }
        if !self.params.all_finite() {
            return Err(NumError::NonFinite { op: "load" }.into());
        }
        Ok(())
    }

    pub fn fields(&self) -> usize {
        self.config.input_dims.len()
    }

    /// Records the encoder on `g` for a batch given as one index list per
    /// field; returns the `batch × encoding_dim` output node.
    fn forward<'a>(&self, g: &mut Graph<'a>, leaves: &[NodeId], indices: &[Vec<usize>]) -> Result<NodeId, NumError> {
        let fields = self.fields();
        let mut hidden = Vec::with_capacity(fields);
        for (f, idx) in indices.iter().enumerate() {
            let x = g.gather_rows(leaves[2 * f], idx.clone())?;
            let x = g.add(x, leaves[2 * f + 1])?;
            hidden.push(g.relu(x)?);
        }
        let h = if hidden.len() == 1 { hidden[0] } else { g.concat_cols(&hidden)? };
        let z = g.matmul(h, leaves[2 * fields])?;
        let z = g.add(z, leaves[2 * fields + 1])?;
        g.sigmoid(z)
    }

    fn check_indices(&self, indices: &[Vec<usize>]) -> Result<(), Cat2VecError> {
        if indices.len() != self.fields() {
            return Err(Cat2VecError::FieldCount { expected: self.fields(), got: indices.len() });
        }
        for (f, (idx, &d)) in indices.iter().zip(&self.config.input_dims).enumerate() {
            if let Some(&bad) = idx.iter().find(|&&i| i >= d) {
                return Err(Cat2VecError::NotOneHot { field: f, detail: format!("code {bad} outside width {d}") });
            }
        }
        Ok(())
    }

    /// Encodes a batch of events given as category codes, one list per field.
    pub fn encode_indices(&self, indices: &[Vec<usize>]) -> Result<Tensor, Cat2VecError> {
        self.check_indices(indices)?;
        let mut g = Graph::new();
        let leaves: Vec<NodeId> = self.params.tensors().iter().map(|t| g.constant_ref(t)).collect();
        let y = self.forward(&mut g, &leaves, indices)?;
        Ok(g.value(y).clone())
    }

    /// Encodes one event given as one one-hot vector per field.
    pub fn encode(&self, one_hots: &[&[f64]]) -> Result<Vec<f64>, Cat2VecError> {
        if one_hots.len() != self.fields() {
            return Err(Cat2VecError::FieldCount { expected: self.fields(), got: one_hots.len() });
        }
        let mut indices = Vec::with_capacity(one_hots.len());
        for (f, (x, &d)) in one_hots.iter().zip(&self.config.input_dims).enumerate() {
            indices.push(vec![one_hot_index(x, d).map_err(|detail| Cat2VecError::NotOneHot { field: f, detail })?]);
        }
        Ok(self.encode_indices(&indices)?.into_data())
    }

    /// Category codes of every event of `dataset`, one list per field.
    pub fn dataset_indices(&self, dataset: &EventDataset) -> Result<Vec<Vec<usize>>, Cat2VecError> {
        let fields = if dataset.has_categories() { 2 } else { 1 };
        if fields != self.fields() {
            return Err(Cat2VecError::FieldCount { expected: self.fields(), got: fields });
        }
        let mut out = vec![dataset.patients.iter().flat_map(|p| p.events.iter().copied()).collect::<Vec<_>>()];
        if fields == 2 {
            out.push(dataset.patients.iter().flat_map(|p| p.categories.iter().flatten().copied()).collect());
        }
        Ok(out)
    }

    /// Encoding of every event of `dataset`, patient-major.
    pub fn encode_dataset(&self, dataset: &EventDataset) -> Result<EncodedEvents, Cat2VecError> {
        let indices = self.dataset_indices(dataset)?;
        let y = self.encode_indices(&indices)?;
        let (ids, positions) = EncodedEvents::provenance(dataset);
        Ok(EncodedEvents::new(ids, positions, self.config.encoding_dim, y.into_data())
            .expect("one encoding row per event"))
    }

    /// Adam on the mean squared distance between encodings of consecutive
    /// events, one epoch being every adjacent pair in shuffled order.
    pub fn train(&mut self, dataset: &EventDataset) -> Result<TrainReport, Cat2VecError> {
        if dataset.is_empty() {
            return Err(Cat2VecError::EmptyDataset);
        }
        if let Some(p) = dataset.patients.iter().find(|p| p.len() < 2) {
            return Err(Cat2VecError::ShortSequence { patient: p.patient_id.clone(), len: p.len() });
        }
        let codes = self.dataset_indices(dataset)?;
        self.check_indices(&codes)?;
        // flat index of the first event of each adjacent pair
        let mut pairs = Vec::new();
        let mut offset = 0;
        for p in &dataset.patients {
            pairs.extend(offset..offset + p.len() - 1);
            offset += p.len();
        }
        let total_events = offset;

        let cfg = self.config.clone();
        let mut r = rng::derive(cfg.seed ^ 0x5eed, stream::CAT2VEC);
        let mut adam = AdamState::new(cfg.adam, self.params.tensors())?;
        let mut tracker = ConvergenceTracker::new(cfg.convergence);
        let mut losses = Vec::new();
        loop {
            pairs.shuffle(&mut r);
            let mut epoch_loss = 0.0;
            for batch in pairs.chunks(cfg.batch_size) {
                let pick = |off: usize| -> Vec<Vec<usize>> {
                    codes.iter().map(|field| batch.iter().map(|&i| field[i + off]).collect()).collect()
                };
                let (left, right) = (pick(0), pick(1));
                let negatives: Option<Vec<Vec<usize>>> = (cfg.contrastive_weight > 0.0).then(|| {
                    let picks: Vec<usize> = batch.iter().map(|_| r.random_range(0..total_events)).collect();
                    codes.iter().map(|field| picks.iter().map(|&i| field[i]).collect()).collect()
                });

                let mut g = Graph::new();
                let leaves: Vec<NodeId> = self.params.tensors().iter().map(|t| g.param(t)).collect();
                let ya = self.forward(&mut g, &leaves, &left)?;
                let yb = self.forward(&mut g, &leaves, &right)?;
                let mut loss = g.mse(ya, yb)?;
                if let Some(neg) = &negatives {
                    let yn = self.forward(&mut g, &leaves, neg)?;
                    let d = g.sub(ya, yn)?;
                    let d2 = g.mul(d, d)?;
                    let ones = g.constant(Tensor::full(&[cfg.encoding_dim, 1], 1.0));
                    let sq = g.matmul(d2, ones)?;
                    let neg_sq = g.scale(sq, -1.0)?;
                    let margin = g.constant(Tensor::full(&[batch.len(), 1], cfg.contrastive_margin));
                    let gap = g.add(margin, neg_sq)?;
                    let hinge = g.relu(gap)?;
                    let repel = g.mean(hinge)?;
                    let repel = g.scale(repel, cfg.contrastive_weight)?;
                    loss = g.add(loss, repel)?;
                }
                let value = g.value(loss).item().expect("scalar loss");
                let mut grads = g.backward(loss)?;
                let grads: Vec<Option<Tensor>> = leaves.iter().map(|&l| grads.take(l)).collect();
                drop(g);
                adam.step(self.params.tensors_mut(), &grads)?;
                epoch_loss += value * batch.len() as f64;
            }
            let mean = epoch_loss / pairs.len() as f64;
            losses.push(mean);
            log::debug!("cat2vec epoch {} loss {:.6e}", losses.len(), mean);
            if tracker.observe(mean) {
                break;
            }
        }
        Ok(TrainReport { losses })
    }
}

/// Position of the single 1 in `x`, which must have width `width`.
fn one_hot_index(x: &[f64], width: usize) -> Result<usize, String> {
    if x.len() != width {
        return Err(format!("vector of length {} for width {}", x.len(), width));
    }
    let hot: Vec<usize> = (0..x.len()).filter(|&i| x[i] != 0.0).collect();
    match hot.as_slice() {
        [i] if x[*i] == 1.0 => Ok(*i),
        [] => Err("no hot entry".into()),
        [i] => Err(format!("entry {} is {}, not 1", i, x[*i])),
        _ => Err(format!("{} hot entries", hot.len())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_hot_validation() {
        assert_eq!(one_hot_index(&[0.0, 1.0, 0.0], 3), Ok(1));
        assert!(one_hot_index(&[0.0, 0.0, 0.0], 3).is_err());
        assert!(one_hot_index(&[1.0, 1.0, 0.0], 3).is_err());
        assert!(one_hot_index(&[0.5, 0.0, 0.0], 3).is_err());
        assert!(one_hot_index(&[1.0, 0.0], 3).is_err());
    }

    #[test]
    fn encode_is_pure_and_bounded() {
        let m = Cat2Vec::init(Cat2VecConfig { input_dims: vec![5], ..Cat2VecConfig::default() }).unwrap();
        let x = [0.0, 0.0, 1.0, 0.0, 0.0];
        let a = m.encode(&[&x]).unwrap();
        assert_eq!(a, m.encode(&[&x]).unwrap());
        assert!(a.iter().all(|&v| v > 0.0 && v < 1.0));
        assert!(m.encode(&[&[0.0; 5]]).is_err());
    }

    #[test]
    fn two_field_shapes() {
        let cfg = Cat2VecConfig { input_dims: vec![6, 3], hidden_dim: 4, encoding_dim: 2, ..Cat2VecConfig::default() };
        let m = Cat2Vec::init(cfg).unwrap();
        assert_eq!(m.params.get(m.params.find("l2.w").unwrap()).shape(), &[8, 2]);
        let y = m.encode_indices(&[vec![0, 5], vec![2, 1]]).unwrap();
        assert_eq!(y.shape(), &[2, 2]);
        m.validate().unwrap();
    }
}
