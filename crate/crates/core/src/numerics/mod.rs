//! Dense feed-forward networks with hand-written backpropagation.
//!
//! Only what the agents need is here: affine layers with ReLU, Softmax or
//! Identity activations, SGD and Adam steps, and central-difference gradient
//! checks for the two loss shapes used by the learners.

mod adam;
mod gradcheck;
mod mlp;
mod snapshot;

pub use adam::{Adam, AdamParams, Optimizer};
pub use gradcheck::{grad_check, LossSpec};
pub use mlp::{softmax_in_place, Activation, ForwardTrace, Gradients, Layer, Mlp};
pub use snapshot::{LayerSnapshot, MlpSnapshot};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NnError {
    #[error("layer dimensions do not chain: {0}")]
    BadDims(String),
    #[error("softmax is only allowed on the final layer (found on layer {0})")]
    SoftmaxNotLast(usize),
    #[error("input has length {got}, network expects {expected}")]
    InputDim { expected: usize, got: usize },
    #[error("input contains a non-finite value at index {0}")]
    NonFiniteInput(usize),
    #[error("expected a scalar output head, network has {0} outputs")]
    NotScalar(usize),
    #[error("expected a softmax output head")]
    NotSoftmax,
    #[error("action index {index} out of range for {width} outputs")]
    BadAction { index: usize, width: usize },
    #[error("non-finite {0}")]
    NonFinite(&'static str),
    #[error("finite-difference step {0} outside (0, 1e-3]")]
    BadEps(f64),
    #[error("trace does not belong to this network")]
    TraceMismatch,
    #[error("snapshot: {0}")]
    Snapshot(String),
}

pub type Result<T, E = NnError> = std::result::Result<T, E>;
