//! HTTP face of the in-memory mock Beacon.

use std::sync::Arc;

use axum::extract::{Path, State};
use axum::http::{HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::post;
use axum::{Json, Router};
use beaconql_core::mock_beacon::MockBeacon;
use beaconql_core::model::Scope;
use serde_json::{json, Value};

#[derive(Clone)]
struct BeaconState {
    beacon: Arc<MockBeacon>,
    token: Arc<str>,
}

/// Pulls the token out of `Authorization: Bearer <token>`.
pub fn bearer(headers: &HeaderMap) -> Option<&str> {
    let raw = headers.get(axum::http::header::AUTHORIZATION)?.to_str().ok()?;
    let (scheme, token) = raw.split_once(' ')?;
    let token = token.trim();
    (scheme.eq_ignore_ascii_case("bearer") && !token.is_empty()).then_some(token)
}

fn error(status: StatusCode, message: impl Into<String>) -> Response {
    (status, Json(json!({ "error": { "errorCode": status.as_u16(), "errorMessage": message.into() } }))).into_response()
}

async fn handle(State(state): State<BeaconState>, Path(scope): Path<String>, headers: HeaderMap, body: String) -> Response {
    if bearer(&headers) != Some(&*state.token) {
        return error(StatusCode::UNAUTHORIZED, "missing or invalid bearer token");
    }
    let scope = match scope.parse::<Scope>() {
        Ok(s) if s.is_concrete() => s,
        _ => return error(StatusCode::NOT_FOUND, format!("unknown entry type `{scope}`")),
    };
    let payload: Value = match serde_json::from_str(&body) {
        Ok(v) => v,
        Err(e) => return error(StatusCode::BAD_REQUEST, format!("body is not JSON: {e}")),
    };
    match state.beacon.answer(scope, &payload) {
        Ok(answer) => Json(answer).into_response(),
        Err(e) => error(StatusCode::from_u16(e.status()).unwrap_or(StatusCode::BAD_REQUEST), e.to_string()),
    }
}

/// Router serving `POST /{scope}`; only `token` is accepted.
pub fn router(beacon: Arc<MockBeacon>, token: &str) -> Router {
    Router::new()
        .route("/{scope}", post(handle))
        .with_state(BeaconState { beacon, token: token.into() })
}
