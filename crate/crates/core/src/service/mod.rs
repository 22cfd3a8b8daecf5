//! Workspace persistence, the command-line pipeline and the HTTP API.

pub mod api;
pub mod workspace;

use thiserror::Error;

use crate::atp::AtpError;
use crate::corpus::CorpusError;
use crate::mapping::MappingError;
use crate::ontology::OntologyError;
use crate::pipeline::PipelineError;

pub use workspace::{Change, JournalEntry, JournalOp, Loaded, RunSettings, Scope, State, Versions, Workspace};

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("workspace {0} is not initialized")]
    NotInitialized(String),
    #[error("workspace {0} is already initialized")]
    AlreadyInitialized(String),
    #[error("not found: {0}")]
    NotFound(String),
    #[error("version conflict: expected {expected}, current {current}")]
    Conflict { expected: String, current: String },
    #[error("bad request: {0}")]
    BadRequest(String),
    #[error("corrupt workspace: {0}")]
    Corrupt(String),
    #[error("cancelled")]
    Cancelled,
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Ontology(#[from] OntologyError),
    #[error(transparent)]
    Mapping(#[from] MappingError),
    #[error(transparent)]
    Atp(AtpError),
    #[error(transparent)]
    Pipeline(PipelineError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl From<AtpError> for ServiceError {
    fn from(e: AtpError) -> Self {
        match e {
            AtpError::Cancelled => ServiceError::Cancelled,
            e => ServiceError::Atp(e),
        }
    }
}

impl From<PipelineError> for ServiceError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Atp(a) => a.into(),
            e => ServiceError::Pipeline(e),
        }
    }
}
