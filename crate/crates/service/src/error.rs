use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::Serialize;
use serde_json::{json, Value};

#[derive(Debug)]
pub enum ApiError {
    Unauthorized,
    Forbidden,
    NotFound(String),
    Conflict(String),
    /// The body is the structured error, which carries an `error` field.
    Unprocessable(Value),
    Internal(String),
}

impl ApiError {
    pub fn not_found(what: impl std::fmt::Display) -> Self {
        ApiError::NotFound(format!("{what} not found"))
    }

    /// Wraps an error enum whose serialized form is tagged with `error`.
    pub fn invalid<E: Serialize + std::fmt::Display>(e: &E) -> Self {
        let mut body = serde_json::to_value(e).unwrap_or_else(|_| json!({}));
        match body.as_object_mut() {
            Some(obj) => {
                obj.entry("error").or_insert_with(|| Value::String("invalid".into()));
                obj.entry("message").or_insert_with(|| Value::String(e.to_string()));
            }
            None => body = json!({"error": "invalid", "message": e.to_string()}),
        }
        ApiError::Unprocessable(body)
    }

    pub fn malformed(message: impl Into<String>) -> Self {
        ApiError::Unprocessable(json!({"error": "malformed_request", "message": message.into()}))
    }

    pub fn status(&self) -> StatusCode {
        match self {
            ApiError::Unauthorized => StatusCode::UNAUTHORIZED,
            ApiError::Forbidden => StatusCode::FORBIDDEN,
            ApiError::NotFound(_) => StatusCode::NOT_FOUND,
            ApiError::Conflict(_) => StatusCode::CONFLICT,
            ApiError::Unprocessable(_) => StatusCode::UNPROCESSABLE_ENTITY,
            ApiError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = self.status();
        let body = match self {
            ApiError::Unauthorized => json!({"error": "unauthorized", "message": "missing or invalid bearer token"}),
            ApiError::Forbidden => json!({"error": "forbidden", "message": "not allowed for this role"}),
            ApiError::NotFound(m) => json!({"error": "not_found", "message": m}),
            ApiError::Conflict(m) => json!({"error": "conflict", "message": m}),
            ApiError::Unprocessable(v) => v,
            ApiError::Internal(m) => {
                tracing::error!("{m}");
                json!({"error": "internal", "message": m})
            }
        };
        (status, Json(body)).into_response()
    }
}

impl From<JsonRejection> for ApiError {
    fn from(r: JsonRejection) -> Self {
        ApiError::malformed(r.body_text())
    }
}

impl From<QueryRejection> for ApiError {
    fn from(r: QueryRejection) -> Self {
        ApiError::malformed(r.body_text())
    }
}

impl From<crate::store::StoreError> for ApiError {
    fn from(e: crate::store::StoreError) -> Self {
        ApiError::Internal(e.to_string())
    }
}

impl From<tutor_core::performance::StoreError> for ApiError {
    fn from(e: tutor_core::performance::StoreError) -> Self {
        match e {
            tutor_core::performance::StoreError::InvalidEvent(m) => {
                ApiError::Unprocessable(json!({"error": "invalid_event", "message": m}))
            }
            other => ApiError::Internal(other.to_string()),
        }
    }
}

pub type ApiResult<T> = Result<T, ApiError>;
