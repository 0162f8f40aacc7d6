//! The MHN model: base embeddings from ids and attributes, BFS/DFS
//! neighbor encoding within each metapath, attention fusion of the two,
//! attention (or multi-head self-attention) across metapaths, and a final
//! dense layer.
//!
//! The forward pass is recorded for all nodes at once on a
//! [`Tape`](crate::diffgrad::Tape); per-node traces are read back from it.

mod checkpoint;
mod config;
pub mod layers;
mod model;
pub mod ops;

pub use checkpoint::{
    read_checkpoint, read_embeddings, write_embeddings, Checkpoint, NamedTensor, CHECKPOINT_FORMAT, CHECKPOINT_VERSION,
};
pub(crate) use checkpoint::write_atomic;
pub use config::{Activation, EncoderKind, FusionMode, ModelConfig};
pub use model::{Embeddings, INFERENCE_EPOCH, ForwardOutput, ForwardTrace, MhnModel, SamplingPlan};

use crate::diffgrad::TensorError;
use crate::hetgraph::GraphError;
use crate::metapath::MetapathError;

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("invalid model config: {0}")]
    Config(String),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Metapath(#[from] MetapathError),
    #[error("{0}")]
    Unreachable(String),
    #[error("model/graph mismatch: {0}")]
    Mismatch(String),
    #[error("bad checkpoint: {0}")]
    Checkpoint(String),
}
