//! Dense tensors, reverse-mode differentiation and the Adam optimizer.

mod graph;
mod optim;
mod tensor;

pub use graph::{mse, sigmoid, Gradients, Graph, NodeId, OpKind};
pub use optim::{
    glorot_uniform, AdamConfig, AdamState, ConvergenceRule, ConvergenceTracker, ParamId, ParamStore,
};
pub use tensor::Tensor;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum NumError {
    #[error("shape mismatch in {op}: {detail}")]
    ShapeMismatch { op: &'static str, detail: String },
    #[error("{op} expects {expected} inputs, got {got}")]
    Arity { op: &'static str, expected: usize, got: usize },
    #[error("non-finite value produced by {op}")]
    NonFinite { op: &'static str },
    #[error("loss must be a scalar, got shape {shape:?}")]
    NonScalarLoss { shape: Vec<usize> },
    #[error("node does not belong to this graph")]
    ForeignNode,
    #[error("invalid hyperparameter: {0}")]
    InvalidHyper(String),
}
