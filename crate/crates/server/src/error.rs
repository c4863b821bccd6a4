//! JSON error bodies: `{"error": <StableName>, "detail": <text>}`.

use axum::extract::rejection::JsonRejection;
use axum::http::{header, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::Json;
use freetext_core::domain::{FeedbackError, ValidationError};
use freetext_core::gateway::{GatewayError, ParseError};
use freetext_core::prompt::TemplateError;
use freetext_core::refinement::{RefinementError, RefinementFailure, RefinementRound};
use freetext_core::StoreError;
use serde::Serialize;

#[derive(Debug, Serialize)]
struct ErrorBody<'a> {
    error: &'a str,
    detail: &'a str,
    /// Nothing was written, so the same request may be sent again.
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    retryable: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    rounds_so_far: Option<&'a [RefinementRound]>,
}

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub name: &'static str,
    pub detail: String,
    pub rounds_so_far: Option<Vec<RefinementRound>>,
}

impl ApiError {
    pub fn new(status: StatusCode, name: &'static str, detail: impl Into<String>) -> Self {
        Self {
            status,
            name,
            detail: detail.into(),
            rounds_so_far: None,
        }
    }

    pub fn unauthorized() -> Self {
        Self::new(StatusCode::UNAUTHORIZED, "Unauthorized", "missing or invalid bearer token")
    }

    pub fn question_not_found(id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, "QuestionNotFound", format!("no question with id {id}"))
    }

    pub fn assignment_not_found(id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, "AssignmentNotFound", format!("no assignment with id {id}"))
    }

    pub fn internal(name: &'static str, detail: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, name, detail)
    }

    fn retryable(&self) -> bool {
        self.status == StatusCode::SERVICE_UNAVAILABLE
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        if self.status.is_server_error() {
            tracing::warn!(status = %self.status, error = self.name, detail = %self.detail, "request failed");
        }
        let body = ErrorBody {
            error: self.name,
            detail: &self.detail,
            retryable: self.retryable(),
            rounds_so_far: self.rounds_so_far.as_deref(),
        };
        let mut response = (self.status, Json(body)).into_response();
        match self.status {
            StatusCode::UNAUTHORIZED => {
                response
                    .headers_mut()
                    .insert(header::WWW_AUTHENTICATE, HeaderValue::from_static("Bearer"));
            }
            StatusCode::SERVICE_UNAVAILABLE => {
                response
                    .headers_mut()
                    .insert(header::RETRY_AFTER, HeaderValue::from_static("1"));
            }
            _ => {}
        }
        response
    }
}

impl From<ValidationError> for ApiError {
    fn from(e: ValidationError) -> Self {
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, e.name(), e.to_string())
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        let status = match e {
            StoreError::NotFound(_) => StatusCode::NOT_FOUND,
            StoreError::DuplicateId(_) | StoreError::VersionConflict { .. } => StatusCode::CONFLICT,
            StoreError::PersistenceDisabled | StoreError::Io(_) | StoreError::Corrupt(_) => {
                StatusCode::INTERNAL_SERVER_ERROR
            }
        };
        Self::new(status, e.name(), e.to_string())
    }
}

impl From<GatewayError> for ApiError {
    fn from(e: GatewayError) -> Self {
        let status = match e {
            GatewayError::ProviderTimeout { .. } | GatewayError::ProviderUnavailable { .. } => {
                StatusCode::SERVICE_UNAVAILABLE
            }
            GatewayError::OutputTooLong { .. } => StatusCode::BAD_GATEWAY,
            GatewayError::EmptyPayload => StatusCode::INTERNAL_SERVER_ERROR,
        };
        Self::new(status, e.name(), e.to_string())
    }
}

impl From<ParseError> for ApiError {
    fn from(e: ParseError) -> Self {
        Self::new(StatusCode::BAD_GATEWAY, e.name(), e.to_string())
    }
}

impl From<FeedbackError> for ApiError {
    fn from(e: FeedbackError) -> Self {
        Self::new(StatusCode::BAD_GATEWAY, "InvalidFeedback", e.to_string())
    }
}

impl From<TemplateError> for ApiError {
    fn from(e: TemplateError) -> Self {
        Self::internal("TemplateError", e.to_string())
    }
}

impl From<RefinementError> for ApiError {
    fn from(e: RefinementError) -> Self {
        match e {
            RefinementError::CriteriaAlreadyPresent | RefinementError::NoCriteria => {
                Self::new(StatusCode::CONFLICT, e.name(), e.to_string())
            }
            RefinementError::InvalidMaxRounds => {
                Self::new(StatusCode::UNPROCESSABLE_ENTITY, e.name(), e.to_string())
            }
            RefinementError::Gateway(e) => e.into(),
            RefinementError::Parse(e) => e.into(),
            RefinementError::Template(e) => e.into(),
        }
    }
}

impl From<RefinementFailure> for ApiError {
    fn from(f: RefinementFailure) -> Self {
        let mut err = ApiError::from(f.error);
        if !f.rounds_so_far.is_empty() {
            err.rounds_so_far = Some(f.rounds_so_far);
        }
        err
    }
}

impl From<JsonRejection> for ApiError {
    fn from(rejection: JsonRejection) -> Self {
        let (status, name) = match &rejection {
            JsonRejection::MissingJsonContentType(_) => {
                (StatusCode::UNSUPPORTED_MEDIA_TYPE, "UnsupportedMediaType")
            }
            JsonRejection::JsonDataError(_) => (StatusCode::UNPROCESSABLE_ENTITY, "InvalidBody"),
            JsonRejection::JsonSyntaxError(_) => (StatusCode::BAD_REQUEST, "MalformedJson"),
            _ => (StatusCode::BAD_REQUEST, "BadRequest"),
        };
        Self::new(status, name, rejection.body_text())
    }
}
