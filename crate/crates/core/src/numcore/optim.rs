use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tensor::Tensor;
use super::NumError;

/// Index of a tensor inside a [`ParamStore`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ParamId(pub usize);

/// Named, ordered collection of trainable tensors.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ParamStore {
    names: Vec<String>,
    tensors: Vec<Tensor>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, tensor: Tensor) -> ParamId {
        self.names.push(name.into());
        self.tensors.push(tensor);
        ParamId(self.tensors.len() - 1)
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.tensors[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.tensors[id.0]
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor] {
        &mut self.tensors
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.tensors.len()).map(ParamId)
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.names.iter().position(|n| n == name).map(ParamId)
    }

    pub fn scalar_count(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.tensors.iter().all(Tensor::is_finite)
    }
}

/// Glorot-uniform matrix: entries in ±sqrt(6 / (fan_in + fan_out)).
pub fn glorot_uniform<R: Rng + ?Sized>(fan_in: usize, fan_out: usize, rng: &mut R) -> Tensor {
    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let data = (0..fan_in * fan_out).map(|_| rng.random_range(-bound..=bound)).collect();
    Tensor::from_parts(vec![fan_in, fan_out], data)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// First/second moment accumulators for bias-corrected Adam.
#[derive(Clone, Debug)]
pub struct AdamState {
    config: AdamConfig,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
    step: u64,
}

impl AdamState {
    pub fn new(config: AdamConfig, params: &[Tensor]) -> Result<Self, NumError> {
        if !(config.lr > 0.0) {
            return Err(NumError::InvalidHyper(format!("learning rate must be positive, got {}", config.lr)));
        }
        Ok(Self {
            config,
            first: params.iter().map(|p| vec![0.0; p.len()]).collect(),
            second: params.iter().map(|p| vec![0.0; p.len()]).collect(),
            step: 0,
        })
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn config(&self) -> &AdamConfig {
        &self.config
    }

    /// Applies one update. `grads[i] == None` means a zero gradient for
    /// parameter `i` (its moments still decay).
    pub fn step(&mut self, params: &mut [Tensor], grads: &[Option<Tensor>]) -> Result<(), NumError> {
        if params.len() != self.first.len() || grads.len() != params.len() {
            return Err(NumError::ShapeMismatch {
                op: "adam_step",
                detail: format!(
                    "{} params, {} grads, state for {}",
                    params.len(),
                    grads.len(),
                    self.first.len()
                ),
            });
        }
        for (i, (p, g)) in params.iter().zip(grads).enumerate() {
            if p.len() != self.first[i].len() || g.as_ref().is_some_and(|g| g.len() != p.len()) {
                return Err(NumError::ShapeMismatch {
                    op: "adam_step",
                    detail: format!("parameter {} has shape {:?}", i, p.shape()),
                });
            }
        }
        self.step += 1;
        let AdamConfig { lr, beta1, beta2, eps } = self.config;
        let bc1 = 1.0 - beta1.powi(self.step as i32);
        let bc2 = 1.0 - beta2.powi(self.step as i32);
        for (i, p) in params.iter_mut().enumerate() {
            let m = &mut self.first[i];
            let v = &mut self.second[i];
            let data = p.data_mut();
            match &grads[i] {
                Some(g) => {
                    for (((w, m), v), &g) in data.iter_mut().zip(m.iter_mut()).zip(v.iter_mut()).zip(g.data()) {
                        *m = beta1 * *m + (1.0 - beta1) * g;
                        *v = beta2 * *v + (1.0 - beta2) * g * g;
                        *w -= lr * (*m / bc1) / ((*v / bc2).sqrt() + eps);
                    }
                }
                None => {
                    for ((w, m), v) in data.iter_mut().zip(m.iter_mut()).zip(v.iter_mut()) {
                        *m *= beta1;
                        *v *= beta2;
                        if *m != 0.0 {
                            *w -= lr * (*m / bc1) / ((*v / bc2).sqrt() + eps);
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

/// Stops training once the epoch-mean loss has failed to improve by a
/// relative `tolerance` for `patience` consecutive epochs, or at `max_epochs`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConvergenceRule {
    pub tolerance: f64,
    pub patience: usize,
    pub max_epochs: usize,
}

impl Default for ConvergenceRule {
    fn default() -> Self {
        Self { tolerance: 1e-4, patience: 5, max_epochs: 200 }
    }
}

/// Running state for a [`ConvergenceRule`].
#[derive(Clone, Debug)]
pub struct ConvergenceTracker {
    rule: ConvergenceRule,
    previous: Option<f64>,
    stalled: usize,
    epochs: usize,
}

impl ConvergenceTracker {
    pub fn new(rule: ConvergenceRule) -> Self {
        Self { rule, previous: None, stalled: 0, epochs: 0 }
    }

    /// Records an epoch loss; returns `true` when training should stop.
    pub fn observe(&mut self, loss: f64) -> bool {
        self.epochs += 1;
        if let Some(prev) = self.previous {
            let improvement = (prev - loss) / prev.abs().max(f64::MIN_POSITIVE);
            if improvement < self.rule.tolerance {
                self.stalled += 1;
            } else {
                self.stalled = 0;
            }
        }
        self.previous = Some(loss);
        self.stalled >= self.rule.patience || self.epochs >= self.rule.max_epochs
    }

    pub fn epochs(&self) -> usize {
        self.epochs
    }
}
