//! Seen-unseen priors, logit-adjusted losses and the classifiers they train.

mod classifier;
mod loss;
mod priors;
mod train;

pub use classifier::{
    argmax_rows, prototype_logits, unit_rows, Classifier, ClassifierKind, LinearClassifier, Predict,
    PrototypeLearner, DEFAULT_PROTO_HIDDEN, DEFAULT_TAU,
};
pub use loss::{batch_zla_loss, cross_entropy, generic_la_loss, zla_loss};
pub use priors::{
    adjusted_argmax, build_priors, offsets, weighted_argmax, LogitOffsets, PriorConfig, Provenance,
};
pub use train::{train_classifier, LossKind, TrainConfig, TrainedClassifier};

use crate::modelfile::ModelFileError;
use crate::nn::FitError;
use crate::numgrad::NumgradError;

#[derive(Debug, thiserror::Error)]
pub enum ZlaError {
    #[error("sigma must be positive and finite, got {0}")]
    InvalidSigma(f64),
    #[error("temperature must be positive and finite, got {0}")]
    InvalidTau(f64),
    #[error("{what} has length {found}, expected {expected}")]
    Length {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("prior of class {class} is not strictly positive")]
    NonPositivePrior { class: usize },
    #[error("{domain} conditional prior sums to {sum}")]
    PriorNotNormalized { domain: &'static str, sum: f64 },
    #[error("{domain} class {class} has zero count; priors must be strictly positive")]
    ZeroCount { class: usize, domain: &'static str },
    #[error("non-finite {0}")]
    NonFinite(&'static str),
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("weight {index} must be positive and finite")]
    NonPositiveWeight { index: usize },
    #[error("{what} row {row} has zero norm; cosine is undefined")]
    ZeroNorm { what: &'static str, row: usize },
    #[error("pseudo label {0} is not an unseen class")]
    PseudoLabel(usize),
    #[error("train split is empty")]
    EmptyTrain,
    #[error("pseudo-unseen set is empty; only the plain-cross-entropy prototype baseline trains without one")]
    MissingPseudo,
    #[error("training failed: {0}")]
    Fit(#[from] FitError),
    #[error(transparent)]
    Numgrad(#[from] NumgradError),
    #[error(transparent)]
    Model(#[from] ModelFileError),
}
