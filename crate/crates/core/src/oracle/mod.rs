//! Concept-similarity oracles `q(x, l) ∈ [0, 1]`.
//!
//! Three backends stand in for a zero-shot multimodal model: a
//! deterministic prototype-cosine mock, a table of precomputed scores, and
//! a client for a remote scoring service.

mod file;
mod http;
mod prototype;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use file::{parse_score_file, write_score_file, ScoreTable};
pub use http::{HttpOracle, HttpOracleConfig, SimilarityRequest, SimilarityResponse};
pub use prototype::PrototypeOracle;

use crate::error::OracleError;

pub trait Oracle: Send + Sync {
    /// Similarity of `instance` (identified by `instance_id`) to concept `concept`.
    fn query(&self, instance: &[f64], instance_id: u64, concept: usize) -> Result<f64, OracleError>;

    /// Short tag recorded alongside derived artifacts.
    fn kind(&self) -> &str;
}

impl<T: Oracle + ?Sized> Oracle for &T {
    fn query(&self, instance: &[f64], instance_id: u64, concept: usize) -> Result<f64, OracleError> {
        (**self).query(instance, instance_id, concept)
    }

    fn kind(&self) -> &str {
        (**self).kind()
    }
}

impl<T: Oracle + ?Sized> Oracle for Arc<T> {
    fn query(&self, instance: &[f64], instance_id: u64, concept: usize) -> Result<f64, OracleError> {
        (**self).query(instance, instance_id, concept)
    }

    fn kind(&self) -> &str {
        (**self).kind()
    }
}

impl<T: Oracle + ?Sized> Oracle for Box<T> {
    fn query(&self, instance: &[f64], instance_id: u64, concept: usize) -> Result<f64, OracleError> {
        (**self).query(instance, instance_id, concept)
    }

    fn kind(&self) -> &str {
        (**self).kind()
    }
}

/// One answered prompt: how confidently the oracle affirmed that the
/// query instance shows the concept.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PromptRecord {
    pub query_image_id: u64,
    pub concept: usize,
    pub concept_label_text: String,
    pub answer_confidence: f64,
}

pub enum OracleHandle {
    Prototype(PrototypeOracle),
    File(ScoreTable),
    Http(HttpOracle),
    /// Any other implementation, e.g. a test double.
    Custom(Arc<dyn Oracle>),
}

impl Oracle for OracleHandle {
    fn query(&self, instance: &[f64], instance_id: u64, concept: usize) -> Result<f64, OracleError> {
        match self {
            OracleHandle::Prototype(o) => o.query(instance, instance_id, concept),
            OracleHandle::File(o) => o.query(instance, instance_id, concept),
            OracleHandle::Http(o) => o.query(instance, instance_id, concept),
            OracleHandle::Custom(o) => o.query(instance, instance_id, concept),
        }
    }

    fn kind(&self) -> &str {
        match self {
            OracleHandle::Prototype(o) => o.kind(),
            OracleHandle::File(o) => o.kind(),
            OracleHandle::Http(o) => o.kind(),
            OracleHandle::Custom(o) => o.kind(),
        }
    }
}

pub(crate) fn check_range(value: f64) -> Result<f64, OracleError> {
    if (0.0..=1.0).contains(&value) {
        Ok(value)
    } else {
        Err(OracleError::Range { value })
    }
}
