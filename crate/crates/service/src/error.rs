use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde_json::{json, Map, Value};

/// JSON error body `{v, error, message, ...}` with a status code.
#[derive(Clone, Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
    pub extra: Map<String, Value>,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError { status, code, message: message.into(), extra: Map::new() }
    }

    pub fn not_found(what: impl std::fmt::Display) -> Self {
        Self::new(StatusCode::NOT_FOUND, "not_found", format!("{what} not found"))
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "bad_request", message)
    }

    pub fn invalid(message: impl Into<String>) -> Self {
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_input", message)
    }

    pub fn conflict(code: &'static str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::CONFLICT, code, message)
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }

    pub fn with(mut self, key: &str, value: Value) -> Self {
        self.extra.insert(key.to_owned(), value);
        self
    }

    pub fn body(&self) -> Value {
        let mut m = Map::new();
        m.insert("v".into(), json!(1));
        m.insert("error".into(), json!(self.code));
        m.insert("message".into(), json!(self.message));
        m.extend(self.extra.clone());
        Value::Object(m)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body())).into_response()
    }
}

impl From<std::io::Error> for ApiError {
    fn from(e: std::io::Error) -> Self {
        ApiError::internal(format!("storage: {e}"))
    }
}

impl From<hilsynth::CheckError> for ApiError {
    fn from(e: hilsynth::CheckError) -> Self {
        match e {
            hilsynth::CheckError::NoConvergence { iterations, residual } => {
                ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "no_convergence", e.to_string())
                    .with("residual", json!(residual))
                    .with("iterations", json!(iterations))
            }
            other => ApiError::invalid(other.to_string()),
        }
    }
}

impl From<hilsynth::ModelError> for ApiError {
    fn from(e: hilsynth::ModelError) -> Self {
        ApiError::invalid(e.to_string())
    }
}

impl From<hilsynth::FormatError> for ApiError {
    fn from(e: hilsynth::FormatError) -> Self {
        ApiError::invalid(e.to_string())
    }
}

impl From<hilsynth::ScenarioError> for ApiError {
    fn from(e: hilsynth::ScenarioError) -> Self {
        ApiError::invalid(e.to_string())
    }
}
