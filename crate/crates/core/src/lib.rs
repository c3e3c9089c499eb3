//! Audio classification of the content of hand-manipulated containers.
//!
//! A recording of someone pouring into or shaking a container carries enough
//! acoustic information to tell what is inside and how full it is. This crate
//! implements the full chain from raw WAV bytes to one of seven combined
//! type-and-level content classes:
//!
//! 1. [`audio`] — WAV decoding, mono mixdown, windowed-sinc resampling to
//!    22,050 Hz, peak normalization.
//! 2. [`dsp`] — onset detection (spectral flux), fixed-length window cut,
//!    log-magnitude spectrogram, bilinear resize to the model input size.
//! 3. [`nn`] — a small from-scratch tensor/layer engine with analytic
//!    gradients, categorical cross-entropy and Adam.
//! 4. [`models`] — the three configurable convolutional stacks (action gate
//!    plus two action-specific content classifiers).
//! 5. [`pipeline`] — gated dispatch: classify the action, run exactly one
//!    specialist, fuse the one-hot outputs into a content class.
//! 6. [`train`] / [`eval`] — the training recipe (100 epochs, Adam 1e-3,
//!    batch 16, minimum-validation-loss checkpointing) and weighted-F1
//!    scoring with confusion matrices.
//! 7. [`data`] — dataset manifests, deterministic stratified splits, and a
//!    seeded synthetic-audio generator for dataset-free verification.
//! 8. [`knn`] — a k-nearest-neighbours baseline over flattened spectrograms.
//!
//! Everything is deterministic given a seed: identical seeds produce
//! bit-identical checkpoints and reports, independent of thread count.

pub mod audio;
pub mod data;
pub mod dsp;
pub mod eval;
pub mod knn;
pub mod models;
pub mod nn;
pub mod pipeline;
pub mod train;

mod util;

pub use audio::AudioClip;
pub use dsp::{DspConfig, OnsetEnvelope, Spectrogram};
pub use models::{ModelConfig, ModelId, ModelSpec};
pub use nn::{Network, Tensor};
pub use pipeline::{ClassTaxonomy, Classification, OneHot, PipelineNets};

use thiserror::Error;

/// Top-level error for operations that cross module boundaries
/// (e.g. the end-to-end [`pipeline::classify`]).
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Wav(#[from] audio::WavError),
    #[error(transparent)]
    Audio(#[from] audio::AudioError),
    #[error(transparent)]
    Dsp(#[from] dsp::DspError),
    #[error(transparent)]
    Nn(#[from] nn::NnError),
    #[error(transparent)]
    Model(#[from] models::ModelError),
    #[error(transparent)]
    Pipeline(#[from] pipeline::PipelineError),
    #[error(transparent)]
    Train(#[from] train::TrainError),
    #[error(transparent)]
    Eval(#[from] eval::EvalError),
    #[error(transparent)]
    Data(#[from] data::DataError),
    #[error(transparent)]
    Knn(#[from] knn::KnnError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
