use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use causeway_core::comparison::ComparisonError;
use causeway_core::dataset::DatasetError;
use causeway_core::discovery::job::ControlError;
use causeway_core::discovery::DiscoveryError;
use causeway_core::graph::EditError;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

/// Body of every error response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
    #[serde(default)]
    pub detail: Value,
}

#[derive(Debug, Clone)]
pub struct ApiError {
    pub status: StatusCode,
    pub body: ErrorBody,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &str, message: impl Into<String>, detail: Value) -> Self {
        Self { status, body: ErrorBody { code: code.to_string(), message: message.into(), detail } }
    }

    pub fn bad_request(code: &str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, code, message, Value::Null)
    }

    pub fn not_found(what: &str, id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, "not_found", format!("no {what} with id {id:?}"), json!({ "kind": what, "id": id }))
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message, Value::Null)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

impl From<std::io::Error> for ApiError {
    fn from(e: std::io::Error) -> Self {
        tracing::error!("storage error: {e}");
        ApiError::internal(format!("storage error: {e}"))
    }
}

impl From<DatasetError> for ApiError {
    fn from(e: DatasetError) -> Self {
        ApiError::bad_request("invalid_dataset", e.to_string())
    }
}

impl From<DiscoveryError> for ApiError {
    fn from(e: DiscoveryError) -> Self {
        match e {
            DiscoveryError::NotReady(a) => ApiError::new(StatusCode::CONFLICT, "result_unavailable", e.to_string(), json!({ "algorithm": a })),
            other => ApiError::bad_request("invalid_job", other.to_string()),
        }
    }
}

impl From<ControlError> for ApiError {
    fn from(e: ControlError) -> Self {
        match e {
            ControlError::Finished(status) => ApiError::new(StatusCode::CONFLICT, "job_finished", "job has already finished", json!({ "status": status })),
            ControlError::Timeout => ApiError::new(StatusCode::GATEWAY_TIMEOUT, "control_timeout", e.to_string(), Value::Null),
        }
    }
}

impl From<EditError> for ApiError {
    fn from(e: EditError) -> Self {
        let message = e.to_string();
        match e {
            EditError::VersionConflict { current, base } => {
                ApiError::new(StatusCode::CONFLICT, "version_conflict", message, json!({ "current_version": current, "base_version": base }))
            }
            EditError::Cycle(cycle) => ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "cycle", message, json!({ "cycle": cycle })),
            EditError::UnknownNode(n) => ApiError::new(StatusCode::BAD_REQUEST, "unknown_node", message, json!({ "node": n })),
            EditError::UnknownEdge(a, b) => ApiError::new(StatusCode::BAD_REQUEST, "unknown_edge", message, json!({ "from": a, "to": b })),
            _ => ApiError::bad_request("invalid_edit", message),
        }
    }
}

impl From<ComparisonError> for ApiError {
    fn from(e: ComparisonError) -> Self {
        match e {
            ComparisonError::TooFewGraphs(n) => ApiError::new(StatusCode::BAD_REQUEST, "too_few_graphs", e.to_string(), json!({ "count": n })),
            ComparisonError::UnknownGraph(id) => ApiError::not_found("graph", &id),
            ComparisonError::Layout(l) => ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "layout", l.to_string(), Value::Null),
        }
    }
}
