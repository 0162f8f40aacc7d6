//! Dense `f64` tensors with a reverse-mode tape and an Adam optimizer.
//!
//! Every model computation is recorded on a [`Tape`] as a sequence of
//! primitive ops. Parameters enter the tape as leaves tied to a
//! [`ParamStore`] entry; [`Tape::backward`] returns their gradients, which
//! [`AdamState::step`] applies in place.
//!
//! All ops check their output for NaN/Inf and fail with
//! [`TensorError::NonFinite`] instead of propagating it.

mod adam;
mod gradcheck;
mod params;
mod tape;
mod tensor;

pub use adam::{AdamConfig, AdamState};
pub use gradcheck::{grad_check, relative_error, GradCheckReport, ParamCheck, RELATIVE_FLOOR};
pub use params::{ParamId, ParamStore};
pub use tape::{CustomOp, Gradients, Tape, Var};
pub use tensor::Tensor;
pub(crate) use tensor::{sigmoid, softmax_in_place};

#[derive(Debug, thiserror::Error)]
pub enum TensorError {
    #[error("tensor of shape {rows}x{cols} cannot hold {len} values")]
    DataLength { rows: usize, cols: usize, len: usize },
    #[error("{op}: incompatible shapes {left:?} and {right:?}")]
    Shape {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("{op}: index {index} out of bounds ({bound})")]
    Index {
        op: &'static str,
        index: usize,
        bound: usize,
    },
    #[error("{op}: empty input")]
    Empty { op: &'static str },
    #[error("{op} produced a non-finite value")]
    NonFinite { op: &'static str },
    #[error("backward needs a 1x1 loss, got {shape:?}")]
    NotScalar { shape: (usize, usize) },
    #[error("backward already ran on this tape; reset it first")]
    BackwardTwice,
    #[error("parameter {0:?} registered twice")]
    DuplicateParam(String),
}
