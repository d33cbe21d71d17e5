//! Small dense feed-forward networks written from scratch: forward passes with
//! inverted dropout, backpropagation to parameters and inputs, Adam, Monte
//! Carlo dropout certainty, binary feature codes and a denoising autoencoder
//! over those codes.

mod binary;
mod certainty;
mod checkpoint;
mod dae;
mod net;
mod train;

pub use binary::{
    decode_binary, encode_binary, max_code_value, BinaryCode, BinaryEncoder, DEFAULT_LEVELS,
};
pub use certainty::{mc_certainty, Certainty, DEFAULT_MC_SAMPLES};
pub use checkpoint::CHECKPOINT_VERSION;
pub use dae::DenoisingAutoencoder;
pub use net::{
    sigmoid, Activation, DenseNet, ForwardCache, Gradients, Layer, LayerSpec, Mode, OutputGrad,
};
pub use train::{
    accuracy, argmax, loss_and_grad, train_batch, train_epoch, AdamConfig, AdamState, Loss, Targets,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("non-finite network input")]
    NonFiniteInput,
    #[error("non-finite training loss {0}")]
    NonFiniteLoss(f64),
    #[error("forward cache does not match this network")]
    StaleCache,
    #[error("invalid architecture: {0}")]
    InvalidArchitecture(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("value {value} outside the code range [0, {max}]")]
    OutOfRange { value: f64, max: f64 },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}
