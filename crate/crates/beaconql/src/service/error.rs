use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use beaconql_core::guard::GuardReport;
use beaconql_core::session::SessionError;
use serde_json::{json, Value};

use crate::analytics::AnalyticsError;
use crate::sdk::SdkError;

/// Error body shared by every route: `{code, message, detail}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
    pub detail: Value,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError { status, code, message: message.into(), detail: Value::Null }
    }

    pub fn with_detail(mut self, detail: Value) -> Self {
        self.detail = detail;
        self
    }

    pub fn unauthorized() -> Self {
        ApiError::new(StatusCode::UNAUTHORIZED, "unauthorized", "a bearer token is required")
    }

    pub fn unknown_session(id: &str) -> Self {
        ApiError::new(StatusCode::NOT_FOUND, "unknown_session", format!("no session `{id}`"))
    }

    pub fn unknown_tab(id: &str) -> Self {
        ApiError::new(StatusCode::NOT_FOUND, "unknown_tab", format!("no tab `{id}`"))
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::BAD_REQUEST, "bad_request", message)
    }

    pub fn guard(report: GuardReport) -> Self {
        let rules: Vec<_> = report.rules().iter().map(|r| r.id()).collect();
        ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "guard_not_passed", format!("script rejected by rules {}", rules.join(", ")))
            .with_detail(serde_json::to_value(report).expect("report serializes"))
    }

    pub fn internal(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        let message = e.to_string();
        match e {
            SessionError::WrongState { expected, actual } => ApiError::new(StatusCode::CONFLICT, "wrong_state", message)
                .with_detail(json!({ "expected": expected, "actual": actual })),
            SessionError::NoRecords => ApiError::new(StatusCode::CONFLICT, "no_records", message),
            SessionError::Validation(v) => ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "validation_error", message)
                .with_detail(json!({ "field": v.field, "message": v.message })),
        }
    }
}

impl From<SdkError> for ApiError {
    fn from(e: SdkError) -> Self {
        let message = e.to_string();
        let upstream = |detail| ApiError::new(StatusCode::BAD_GATEWAY, "upstream_error", message.clone()).with_detail(detail);
        match e {
            SdkError::HttpError { status, body } => upstream(json!({ "status": status, "body": body })),
            SdkError::Unauthorized => upstream(json!({ "status": 401 })),
            SdkError::Transport(reason) => upstream(json!({ "reason": reason })),
            SdkError::Frame(_) | SdkError::Payload(_) => upstream(Value::Null),
            SdkError::InvalidScope(_) | SdkError::EmptyFilter | SdkError::InvalidInterval(_) => {
                ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "validation_error", message)
            }
        }
    }
}

impl From<AnalyticsError> for ApiError {
    fn from(e: AnalyticsError) -> Self {
        let message = e.to_string();
        match e {
            AnalyticsError::GuardNotPassed(report) => ApiError::guard(report),
            AnalyticsError::Timeout { limit_ms, stdout, stderr } => ApiError::new(StatusCode::GATEWAY_TIMEOUT, "timeout", message)
                .with_detail(json!({ "limit_ms": limit_ms, "stdout": stdout, "stderr": stderr })),
            AnalyticsError::InterpreterMissing(_) => ApiError::new(StatusCode::SERVICE_UNAVAILABLE, "interpreter_missing", message),
            AnalyticsError::Io(_) => ApiError::internal(message),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = json!({ "code": self.code, "message": self.message, "detail": self.detail });
        (self.status, Json(body)).into_response()
    }
}
