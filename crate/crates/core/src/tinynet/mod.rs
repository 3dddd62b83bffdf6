//! A minimal reverse-mode autodiff engine sized for training small
//! encoder-decoder flow networks on a CPU, plus magnitude pruning and a
//! deterministic checkpoint format.
//!
//! Values are `[C, H, W]` (or scalar) f32 tensors on a per-step tape; the
//! differentiable primitives are exactly what the flow networks need:
//! 3x3 same convolution, 2x average pooling, 2x nearest/bilinear upsampling,
//! leaky ReLU, channel concatenation, elementwise arithmetic, horizontal
//! bilinear warping, and an L1 reconstruction loss.

mod checkpoint;
mod graph;
mod net;
mod optim;
mod prune;

pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use graph::{Graph, NodeId, TensorData};
pub use net::{ForwardPass, FlowNetwork, DOWNSAMPLE_FACTOR};
pub use optim::AdamState;
pub use prune::{prune, PruneSpec};

use thiserror::Error;

/// Errors raised by the tensor engine, networks, and optimizer.
#[derive(Debug, Error)]
pub enum NetError {
    #[error("shape mismatch in {op}: {lhs:?} vs {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },
    #[error("{op} expects a [C, H, W] tensor, got shape {shape:?}")]
    NotSpatial { op: &'static str, shape: Vec<usize> },
    #[error("{op} needs even spatial dimensions, got {h}x{w}")]
    OddSpatial { op: &'static str, h: usize, w: usize },
    #[error("backward requires a scalar loss, got shape {0:?}")]
    NonScalarLoss(Vec<usize>),
    #[error(
        "input {h}x{w} is not divisible by the network downsample factor {factor}; \
         pad to {need_h}x{need_w}"
    )]
    IndivisibleInput {
        h: usize,
        w: usize,
        factor: usize,
        need_h: usize,
        need_w: usize,
    },
    #[error("non-finite gradient in parameter {0}")]
    NonFiniteGradient(String),
    #[error("prune fraction {0} outside [0, 1]")]
    InvalidPruneFraction(f32),
    #[error("optimizer state tracks {expected} parameters, got {got}")]
    StateMismatch { expected: usize, got: usize },
    #[error("malformed checkpoint {path}: {detail}")]
    MalformedCheckpoint { path: String, detail: String },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, NetError>;
