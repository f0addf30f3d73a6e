use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use ptwin_core::resource::ResourceError;
use ptwin_core::twin::TwinError;
use serde_json::json;

#[derive(Debug, thiserror::Error)]
pub enum ApiError {
    #[error(transparent)]
    Twin(#[from] TwinError),
    #[error("{0}")]
    BadRequest(String),
    #[error("internal: {0}")]
    Internal(String),
}

impl ApiError {
    pub fn status(&self) -> StatusCode {
        match self {
            ApiError::BadRequest(_) => StatusCode::BAD_REQUEST,
            ApiError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
            ApiError::Twin(e) => match e {
                TwinError::StaleVersion { .. }
                | TwinError::WeekOutOfOrder { .. }
                | TwinError::Resource(ResourceError::AlreadyDecided(_)) => StatusCode::CONFLICT,
                TwinError::UnknownRecommendation(_) => StatusCode::NOT_FOUND,
                TwinError::UnknownKind(_) | TwinError::UnknownComponent(_) => StatusCode::BAD_REQUEST,
                TwinError::MissingInput(_) | TwinError::IncompleteReplay(_) | TwinError::NoActualFinish => {
                    StatusCode::PRECONDITION_FAILED
                }
                TwinError::Io(_) => StatusCode::INTERNAL_SERVER_ERROR,
                _ => StatusCode::UNPROCESSABLE_ENTITY,
            },
        }
    }

    fn code(&self) -> &'static str {
        match self {
            ApiError::BadRequest(_) => "bad-request",
            ApiError::Internal(_) => "internal",
            ApiError::Twin(e) => match e {
                TwinError::SchemaViolation { .. } => "schema-violation",
                TwinError::StaleVersion { .. } => "stale-version",
                TwinError::Resource(ResourceError::AlreadyDecided(_)) => "already-decided",
                TwinError::UnknownRecommendation(_) => "unknown-recommendation",
                TwinError::UnknownKind(_) => "unknown-kind",
                TwinError::UnknownComponent(_) => "unknown-component",
                TwinError::WeekOutOfOrder { .. } => "week-out-of-order",
                TwinError::MissingInput(_) => "missing-input",
                TwinError::IncompleteReplay(_) => "incomplete-replay",
                _ => "data-error",
            },
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut body = json!({ "error": self.code(), "message": self.to_string() });
        match &self {
            ApiError::Twin(TwinError::StaleVersion { current, .. }) => body["version"] = json!(current),
            ApiError::Twin(TwinError::SchemaViolation { row, column, .. }) => {
                body["row"] = json!(row);
                body["column"] = json!(column);
            }
            _ => {}
        }
        (self.status(), Json(body)).into_response()
    }
}
