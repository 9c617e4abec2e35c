//! Human-study service: serves trials in protocol order, records decisions
//! durably and exports them as session records the fitting code reads directly.

pub mod config;
pub mod http;
pub mod screening;
pub mod session;
pub mod store;
pub mod study;

use thiserror::Error;

pub use config::StudyConfig;
pub use http::router;
pub use session::{Answer, Assignment, Phase, SessionState, TrialPayload};
pub use study::{prepare_pools, CreateRequest, CreateResponse, PoolEntry, Study, SubmitRequest};

#[derive(Debug, Error)]
pub enum StudyError {
    #[error("unknown session token")]
    Auth,
    #[error("admin token required")]
    Forbidden,
    #[error("step {got} does not match the session cursor{}", expected.map(|e| format!(" (expected {e})")).unwrap_or_else(|| " (session finished)".into()))]
    Conflict { expected: Option<usize>, got: usize },
    #[error("capacity error: {0}")]
    Capacity(String),
    #[error("bad request: {0}")]
    BadRequest(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("corrupt study data: {0}")]
    Corrupt(String),
    #[error(transparent)]
    Core(#[from] coax::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
