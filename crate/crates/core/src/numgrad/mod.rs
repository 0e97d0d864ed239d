//! Dense reverse-mode autodiff and Adam, enough to train the small networks
//! used throughout the crate with first-order gradients.

mod adam;
mod check;
mod tape;
mod tensor;

pub use adam::{Adam, AdamConfig};
pub use check::{grad_check, value_and_grad, LossFn};
pub use tape::{Gradients, Primitive, Tape, Var};
pub use tensor::{Shape, Tensor};

pub(crate) use tape::l2;

#[derive(Debug, thiserror::Error)]
pub enum NumgradError {
    #[error("{op}: incompatible shapes {left} and {right}")]
    ShapeMismatch {
        op: &'static str,
        left: Shape,
        right: Shape,
    },
    #[error("shape {shape} needs {} values, got {count}", shape.len())]
    ValueCount { shape: Shape, count: usize },
    #[error("non-finite value at flat index {index}")]
    NonFinite { index: usize },
    #[error("row {row} has {found} values, expected {expected}")]
    RaggedRows {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("{op} expects {expected} operands, got {found}")]
    Arity {
        op: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("variable {0} is not on this tape")]
    UnknownVar(usize),
    #[error("{op}: row {row} has zero norm")]
    ZeroNorm { op: &'static str, row: usize },
    #[error("gather: {indices} indices for {rows} rows")]
    IndexCount { rows: usize, indices: usize },
    #[error("gather: column index {index} out of range for {cols} columns")]
    IndexOutOfRange { index: usize, cols: usize },
    #[error("loss must be a 1x1 scalar, got {0}")]
    NonScalarLoss(Shape),
    #[error("optimizer tracks {expected} parameters, got {params} params and {grads} grads")]
    ParamCount {
        expected: usize,
        params: usize,
        grads: usize,
    },
    #[error("loss closure is not deterministic: {first} then {second}")]
    NonDeterministic { first: f64, second: f64 },
}
