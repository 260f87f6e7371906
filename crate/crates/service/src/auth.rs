use axum::extract::FromRequestParts;
use axum::http::header::AUTHORIZATION;
use axum::http::request::Parts;

use crate::error::ApiError;
use crate::state::AppState;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Caller {
    Teacher,
    Student(String),
}

impl Caller {
    pub fn student(&self) -> Result<&str, ApiError> {
        match self {
            Caller::Student(id) => Ok(id),
            Caller::Teacher => Err(ApiError::Forbidden),
        }
    }

    pub fn teacher(&self) -> Result<(), ApiError> {
        match self {
            Caller::Teacher => Ok(()),
            Caller::Student(_) => Err(ApiError::Forbidden),
        }
    }

    /// Teachers see everyone; students see only themselves.
    pub fn may_view(&self, student_id: &str) -> bool {
        match self {
            Caller::Teacher => true,
            Caller::Student(id) => id == student_id,
        }
    }
}

impl FromRequestParts<AppState> for Caller {
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, state: &AppState) -> Result<Self, ApiError> {
        let token = parts
            .headers
            .get(AUTHORIZATION)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.strip_prefix("Bearer "))
            .map(str::trim)
            .ok_or(ApiError::Unauthorized)?;
        let auth = &state.config.auth;
        if token == auth.teacher_token {
            return Ok(Caller::Teacher);
        }
        auth.students
            .get(token)
            .map(|id| Caller::Student(id.clone()))
            .ok_or(ApiError::Unauthorized)
    }
}
