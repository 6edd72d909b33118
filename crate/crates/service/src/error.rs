use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use convex_core::dialogue::DialogueError;
use convex_core::session::SessionStatus;
use convex_core::session_store::StoreError;
use convex_core::tabular::TabularError;
use serde::{Deserialize, Serialize};
use serde_json::json;

/// An error as the API reports it: status, stable machine code, message.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
    pub remedy: Option<String>,
}

/// Wire form of an error body.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub remedy: Option<String>,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            code,
            message: message.into(),
            remedy: None,
        }
    }

    pub fn with_remedy(mut self, remedy: impl Into<String>) -> Self {
        self.remedy = Some(remedy.into());
        self
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::BAD_REQUEST, "invalid_request", message)
    }

    pub fn internal(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        if self.status.is_server_error() {
            tracing::error!(code = self.code, message = %self.message, "request failed");
        }
        let body = ErrorBody {
            code: self.code.to_string(),
            message: self.message,
            remedy: self.remedy,
        };
        (self.status, Json(json!({ "error": body }))).into_response()
    }
}

impl From<DialogueError> for ApiError {
    fn from(e: DialogueError) -> Self {
        let message = e.to_string();
        let remedy = e.remedy();
        let err = match &e {
            DialogueError::NotActive(SessionStatus::Paused) => {
                ApiError::new(StatusCode::CONFLICT, "session_paused", message)
            }
            DialogueError::NotActive(_) => ApiError::new(StatusCode::CONFLICT, "session_ended", message),
            DialogueError::EmptyUtterance => ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "empty_message", message),
            DialogueError::Upload {
                error: TabularError::UnsupportedFormat { .. },
                ..
            } => ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "unsupported_format", message),
            DialogueError::Upload { .. } => ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_dataset", message),
            DialogueError::NoSuchTurn(_) => ApiError::new(StatusCode::NOT_FOUND, "turn_not_found", message),
            DialogueError::NotABotTurn(_) => ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "not_a_bot_turn", message),
            DialogueError::EmptySession => ApiError::new(StatusCode::CONFLICT, "nothing_to_tell", message),
            DialogueError::Survey { .. } => ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_survey", message),
            DialogueError::Snapshot(_) => ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "snapshot_corrupt", message),
        };
        match remedy {
            Some(r) => err.with_remedy(r),
            None => err,
        }
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::NotFound(id) => ApiError::new(
                StatusCode::NOT_FOUND,
                "session_not_found",
                format!("session {id} not found"),
            ),
            StoreError::Corrupt { .. } => {
                ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "store_corrupt", e.to_string())
            }
            StoreError::Io { .. } => ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "store_io", e.to_string()),
        }
    }
}
