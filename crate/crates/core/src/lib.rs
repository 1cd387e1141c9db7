//! Concept-guided machine unlearning.
//!
//! The crate covers the full desk-scale workflow: a small feed-forward
//! classifier with exact gradients, synthetic entangled-concept data,
//! pluggable concept-similarity oracles, transition-matrix guided
//! perturbing labels, positive/negative input-noise synthesis, the
//! unlearning engines (noise-guided realignment, UNSIR, fine-tune,
//! retrain) and the evaluation harness (accuracy, loss-threshold
//! membership inference, prediction export).
//!
//! Data-parallel inner loops go through [`par::Exec`]. With the default
//! `parallel` feature they run on rayon; without it every call site
//! falls back to the sequential path. Both paths produce bit-identical
//! results because reductions always use a fixed chunking.

pub mod data;
pub mod error;
pub mod eval;
pub mod fixtures;
pub mod guidance;
pub mod noise;
pub mod numeric;
pub mod oracle;
pub mod par;
pub mod pipeline;
pub mod sweep;
pub mod unlearn;

mod io_util;
mod rng;

pub use error::{Error, OracleError, Result};
pub use numeric::{Activation, Classifier, GradSign, Gradients, Optimizer, OptimizerKind, Tensor};
pub use par::Exec;
