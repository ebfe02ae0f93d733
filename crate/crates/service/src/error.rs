use modwatch_core::models::ModelError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("no model has been trained yet")]
    NoModel,
    #[error("{0}")]
    Conflict(String),
    #[error("{0}")]
    NotFound(String),
    #[error("{0}")]
    BadRequest(String),
    #[error("training set has a single class: {0}")]
    SingleClass(String),
    #[error("model: {0}")]
    Model(ModelError),
    #[error("replay diverged: {0}")]
    Replay(String),
    #[error("storage: {0}")]
    Storage(String),
    #[error("unauthorized")]
    Unauthorized,
}

impl ServiceError {
    /// Stable machine-readable code used in HTTP error bodies.
    pub fn code(&self) -> &'static str {
        match self {
            Self::NoModel => "no_model",
            Self::Conflict(_) => "conflict",
            Self::NotFound(_) => "not_found",
            Self::BadRequest(_) => "bad_request",
            Self::SingleClass(_) => "single_class",
            Self::Model(_) => "model_error",
            Self::Replay(_) => "replay_mismatch",
            Self::Storage(_) => "storage",
            Self::Unauthorized => "unauthorized",
        }
    }
}

impl From<ModelError> for ServiceError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::SingleClass => Self::SingleClass(e.to_string()),
            other => Self::Model(other),
        }
    }
}

impl From<std::io::Error> for ServiceError {
    fn from(e: std::io::Error) -> Self {
        Self::Storage(e.to_string())
    }
}

impl From<serde_json::Error> for ServiceError {
    fn from(e: serde_json::Error) -> Self {
        Self::Storage(e.to_string())
    }
}
