//! Dense tensors, reverse-mode differentiation, Adam and PCA.

mod adam;
mod pca;
mod tape;
mod tensor;

pub use adam::{AdamConfig, AdamState};
pub use pca::{pca_project, Pca};
pub use tape::{Gradients, Tape, Var, LAYER_NORM_EPS, MASK_NEG};
pub use tensor::{Scalar, Tensor};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NumericsError {
    #[error("{op}: incompatible shapes {left:?} and {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },
    #[error("softmax row {row} is fully masked")]
    FullyMaskedRow { row: usize },
    #[error("every position is masked out of the loss")]
    NoTargets,
    #[error("index {target} out of range for {classes} classes")]
    TargetOutOfRange { target: u32, classes: usize },
    #[error("backward needs a scalar loss, got shape {shape:?}")]
    NotScalar { shape: Vec<usize> },
    #[error("malformed tape: node {node} refers forward (cycle)")]
    MalformedTape { node: usize },
    #[error("cannot project onto {k} components of a {n}x{d} matrix")]
    BadRank { k: usize, n: usize, d: usize },
}
