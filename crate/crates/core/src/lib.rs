//! Zero-shot logit adjustment laboratory.
//!
//! Generalized zero-shot learning at desk scale: seeded synthetic worlds,
//! pseudo-unseen feature generators, a prototype classifier trained with a
//! prior-adjusted cross-entropy, balanced seen/unseen metrics and exact
//! bound checks on finite worlds.

pub mod cli;
pub mod datagen;
pub mod genmodels;
pub mod metrics;
pub mod modelfile;
pub mod nn;
pub mod numgrad;
pub mod zla;
