use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Failures reported by a concept-similarity oracle.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("no score for instance {instance_id}, concept {concept}")]
    Lookup { instance_id: u64, concept: usize },
    #[error("concept {concept} out of range for {classes} classes")]
    Concept { concept: usize, classes: usize },
    #[error("oracle returned {value}, outside [0, 1]")]
    Range { value: f64 },
    #[error("transport error after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: u64, message: String },
    #[error("task error: {0}")]
    Task(String),
    #[error("normalization error: {0}")]
    Normalization(String),
    #[error("cache error: {0}")]
    Cache(String),
    #[error("evaluation error: {0}")]
    Eval(String),
    #[error("oracle query failed for class {class} exemplar {exemplar} (instance {instance_id}), concept {concept}: {source}")]
    OracleQuery {
        class: usize,
        exemplar: usize,
        instance_id: u64,
        concept: usize,
        #[source]
        source: OracleError,
    },
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error("missing artifact {path}: run `{producer}` first")]
    MissingArtifact { path: PathBuf, producer: &'static str },
    #[error("output directory is in use: {0} exists (remove it if no other run is active)")]
    Locked(PathBuf),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn parse(offset: usize, message: impl Into<String>) -> Self {
        Error::Parse { offset: offset as u64, message: message.into() }
    }
}
