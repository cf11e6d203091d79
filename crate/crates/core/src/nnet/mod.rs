//! Small dense numerical kernel: tensors, reverse-mode gradients, layers,
//! dropout and Adam.

mod checkpoint;
mod gradcheck;
mod graph;
mod layers;
mod optim;
mod params;
mod tensor;

use thiserror::Error;

pub use checkpoint::{
    read_checkpoint, write_checkpoint, NamedTensors, CHECKPOINT_MAGIC, CHECKPOINT_VERSION,
};
pub use gradcheck::{check_gradients, GradCheckOptions, GradCheckReport};
pub use graph::{Gradients, Graph, Var};
pub use layers::{bilinear_scores, dropout, dropout_mask, ff_forward, Activation, FFLayer};
pub use optim::{Adam, AdamConfig, ParamGroup};
pub use params::{ParamId, ParamStore};
pub use tensor::Tensor;

#[derive(Debug, Error)]
pub enum NnetError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("graph was recorded against a different parameter state")]
    Stale,
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}
