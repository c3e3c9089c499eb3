//! A minimal tensor-and-layer engine with exact analytic gradients.
//!
//! Just enough machinery to train the three classifiers from scratch:
//! sequential stacks of {conv2d, maxpool2d, dense, relu, softmax, dropout,
//! flatten}, categorical cross-entropy, and Adam. No graph autodiff — a
//! tape over a sequential stack is all these models need.
//!
//! Weights and activations are f32 with f64 accumulation in every
//! reduction; the engine is generic over the element type so gradient
//! checks can run the identical code in f64.

pub mod checkpoint;
mod adam;
mod layer;
mod network;
mod tensor;

pub use adam::AdamState;
pub use layer::{pooled_extent, Layer, PoolPadding, KERNEL, POOL_STRIDE};
pub use network::{cross_entropy, one_hot, Gradients, LayerParams, Mode, Network, Tape};
pub use tensor::{convert, Element, Tensor};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("shape mismatch at layer {layer}: expected {expected:?}, got {got:?}")]
    ShapeMismatch { layer: usize, expected: Vec<usize>, got: Vec<usize> },
    #[error("invalid layer stack at layer {layer}: {reason}")]
    InvalidStack { layer: usize, reason: String },
    #[error("tape does not match this network: {reason}")]
    TapeMismatch { reason: String },
    #[error("non-finite gradient at layer {layer}")]
    NonFiniteGradient { layer: usize },
    #[error("train-mode forward through dropout layer {layer} needs an RNG")]
    MissingRng { layer: usize },
}
