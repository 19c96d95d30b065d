use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use euc_core::changes::StoreError;
use euc_core::ingest::IngestError;
use euc_core::inventory::InventoryError;
use serde::Serialize;

/// Error body shared by every endpoint: `{code, message, field?}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Problem {
    #[serde(skip)]
    pub status: StatusCode,
    pub code: String,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub field: Option<String>,
}

fn status_for(code: &str) -> StatusCode {
    match code {
        "not-found" => StatusCode::NOT_FOUND,
        "missing-principal" => StatusCode::UNAUTHORIZED,
        "self-review" => StatusCode::FORBIDDEN,
        "conflict" | "duplicate-file-key" | "record-immutable" | "not-pending" | "invalid-transition" => {
            StatusCode::CONFLICT
        }
        "missing-comment" | "missing-justification" | "missing-reviewer" => StatusCode::UNPROCESSABLE_ENTITY,
        "storage-failure" => StatusCode::INTERNAL_SERVER_ERROR,
        _ => StatusCode::BAD_REQUEST,
    }
}

impl Problem {
    pub fn new(code: &str, message: impl Into<String>) -> Self {
        Problem {
            status: status_for(code),
            code: code.to_string(),
            message: message.into(),
            field: None,
        }
    }

    pub fn with_field(mut self, field: impl Into<String>) -> Self {
        self.field = Some(field.into());
        self
    }

    pub fn not_found(message: impl Into<String>) -> Self {
        Problem::new("not-found", message)
    }

    pub fn invalid(field: &str, message: impl Into<String>) -> Self {
        Problem::new("validation-error", message).with_field(field)
    }
}

impl IntoResponse for Problem {
    fn into_response(self) -> Response {
        if self.status.is_server_error() {
            tracing::error!(code = %self.code, "{}", self.message);
        }
        (self.status, Json(self)).into_response()
    }
}

impl From<InventoryError> for Problem {
    fn from(e: InventoryError) -> Self {
        let p = Problem::new(e.code(), e.to_string());
        match e.field() {
            Some(f) => p.with_field(f),
            None => p,
        }
    }
}

impl From<StoreError> for Problem {
    fn from(e: StoreError) -> Self {
        let p = Problem::new(e.code(), e.to_string());
        match e {
            StoreError::Invalid { field, .. } => p.with_field(field),
            _ => p,
        }
    }
}

impl From<IngestError> for Problem {
    fn from(e: IngestError) -> Self {
        Problem::new(e.code(), e.to_string()).with_field("body")
    }
}
