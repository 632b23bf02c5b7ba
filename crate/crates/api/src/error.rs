use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use marrop_audit::io::FormatError;
use marrop_audit::{ElectionError, SessionError};
use serde::Serialize;

/// Error body: a machine-readable code and a human message.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ErrorBody {
    pub code: &'static str,
    pub message: String,
}

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub body: ErrorBody,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> ApiError {
        ApiError {
            status,
            body: ErrorBody {
                code,
                message: message.into(),
            },
        }
    }

    pub fn not_found(kind: &str, id: &str) -> ApiError {
        ApiError::new(StatusCode::NOT_FOUND, "not_found", format!("no {kind} `{id}`"))
    }

    pub fn bad_request(message: impl Into<String>) -> ApiError {
        ApiError::new(StatusCode::BAD_REQUEST, "bad_request", message)
    }

    pub fn conflict(expected: u64, given: u64) -> ApiError {
        ApiError::new(
            StatusCode::CONFLICT,
            "version_conflict",
            format!("session is at version {expected}, request was for version {given}"),
        )
    }

    pub fn storage(message: impl Into<String>) -> ApiError {
        ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "storage_error", message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

impl From<FormatError> for ApiError {
    fn from(e: FormatError) -> ApiError {
        let code = match e {
            FormatError::Parse { .. } => "parse_error",
            FormatError::UnknownReference { .. } => "unknown_reference",
            FormatError::Validation(_) => "validation_error",
            FormatError::Io { .. } => return ApiError::storage(e.to_string()),
            _ => "bad_document",
        };
        ApiError::new(StatusCode::BAD_REQUEST, code, e.to_string())
    }
}

impl From<ElectionError> for ApiError {
    fn from(e: ElectionError) -> ApiError {
        ApiError::new(StatusCode::BAD_REQUEST, "validation_error", e.to_string())
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> ApiError {
        let (status, code) = match &e {
            SessionError::WrongBatch { .. } => (StatusCode::UNPROCESSABLE_ENTITY, "wrong_batch"),
            SessionError::HandCount(_) => (StatusCode::UNPROCESSABLE_ENTITY, "invalid_hand_count"),
            SessionError::InvalidRiskLimit(_) => (StatusCode::UNPROCESSABLE_ENTITY, "invalid_risk_limit"),
            SessionError::Election(_) => (StatusCode::UNPROCESSABLE_ENTITY, "invalid_request"),
            SessionError::SeedMismatch { .. } | SessionError::CannotShrink { .. } => {
                (StatusCode::UNPROCESSABLE_ENTITY, "invalid_request")
            }
            SessionError::AlreadyTerminal(_) | SessionError::NoPendingDraw => (StatusCode::CONFLICT, "invalid_transition"),
            _ => (StatusCode::UNPROCESSABLE_ENTITY, "audit_error"),
        };
        ApiError::new(status, code, e.to_string())
    }
}
