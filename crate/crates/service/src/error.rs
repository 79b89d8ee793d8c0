use agenda_core::retrieval::RetrievalError;
use agenda_core::vectorizer::VectorizeError;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde_json::{json, Value};

use crate::session::{EditError, SessionError};

/// Error body: `{code, message, detail}`.
#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
    pub detail: Value,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl ToString) -> Self {
        ApiError {
            status,
            code,
            message: message.to_string(),
            detail: Value::Null,
        }
    }

    pub fn with_detail(mut self, detail: Value) -> Self {
        self.detail = detail;
        self
    }

    pub fn bad_request(message: impl ToString) -> Self {
        ApiError::new(StatusCode::BAD_REQUEST, "bad_request", message)
    }

    pub fn not_found(message: impl ToString) -> Self {
        ApiError::new(StatusCode::NOT_FOUND, "not_found", message)
    }

    pub fn internal(message: impl ToString) -> Self {
        ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = json!({
            "code": self.code,
            "message": self.message,
            "detail": self.detail,
        });
        (self.status, Json(body)).into_response()
    }
}

impl From<EditError> for ApiError {
    fn from(e: EditError) -> Self {
        use StatusCode as S;
        let (status, code) = match &e {
            EditError::TermCap => (S::CONFLICT, "term_cap"),
            EditError::DuplicateTerm(_) => (S::CONFLICT, "duplicate_term"),
            EditError::LastTerm(_) => (S::CONFLICT, "last_term"),
            EditError::Accepted => (S::CONFLICT, "accepted"),
            EditError::Order => (S::CONFLICT, "history_order"),
            EditError::MissingTerm(_) => (S::UNPROCESSABLE_ENTITY, "missing_term"),
            EditError::Threshold(_) => (S::UNPROCESSABLE_ENTITY, "threshold"),
            EditError::NoTerms | EditError::EmptyTerm | EditError::EmptyLabel => (S::BAD_REQUEST, "bad_request"),
        };
        let detail = match &e {
            EditError::TermCap => json!({ "max_terms": agenda_core::vectorizer::MAX_QUERY_TERMS }),
            EditError::Threshold(t) => json!({ "threshold": t, "range": "(0, 1]" }),
            EditError::DuplicateTerm(t) | EditError::MissingTerm(t) | EditError::LastTerm(t) => json!({ "term": t }),
            _ => Value::Null,
        };
        ApiError::new(status, code, &e).with_detail(detail)
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        match e {
            SessionError::UnknownDraft(id) => {
                ApiError::not_found(format!("no query `{id}`")).with_detail(json!({ "id": id }))
            }
            SessionError::Edit(e) => e.into(),
            e @ (SessionError::Io { .. } | SessionError::Log { .. }) => ApiError::internal(e),
        }
    }
}

impl From<VectorizeError> for ApiError {
    fn from(e: VectorizeError) -> Self {
        match &e {
            VectorizeError::UnknownTerm { term, suggestions } => {
                ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "unknown_term", &e)
                    .with_detail(json!({ "term": term, "suggestions": suggestions }))
            }
            VectorizeError::QueryLength(n) => ApiError::bad_request(&e).with_detail(json!({ "terms": n })),
            _ => ApiError::internal(e),
        }
    }
}

impl From<RetrievalError> for ApiError {
    fn from(e: RetrievalError) -> Self {
        match e {
            RetrievalError::Threshold(t) => EditError::Threshold(t).into(),
            RetrievalError::InvalidQuery { .. } => ApiError::bad_request(e),
            e => ApiError::internal(e),
        }
    }
}
