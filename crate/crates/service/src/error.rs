use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use lexrag_core::loader::DocDiagnostic;
use serde_json::json;

use crate::SCHEMA_VERSION;

/// An error response: `{schema_version, error: {code, message, ...}}`.
#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
    pub client: Option<String>,
    pub diagnostics: Vec<DocDiagnostic>,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self {
            status,
            code,
            message: message.into(),
            client: None,
            diagnostics: Vec::new(),
        }
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "bad_request", message)
    }

    pub fn upstream(client: String, message: impl Into<String>) -> Self {
        Self {
            client: Some(client),
            ..Self::new(StatusCode::BAD_GATEWAY, "upstream_failure", message)
        }
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut error = json!({ "code": self.code, "message": self.message });
        if let Some(client) = self.client {
            error["client"] = json!(client);
        }
        if !self.diagnostics.is_empty() {
            error["diagnostics"] = json!(self.diagnostics);
        }
        (self.status, Json(json!({ "schema_version": SCHEMA_VERSION, "error": error }))).into_response()
    }
}
