#![allow(dead_code)]

pub mod sql;
pub mod analytics;
pub mod interactions;
pub mod workflows;

use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use beaconql::config::AnalyticsConfig;
use beaconql::mocks::shipped_script;
use beaconql::sdk::{LocalTransport, RecordingTransport};
use beaconql::service::{router, AppState, ServiceOptions};
use beaconql_core::cohort::{generate_fixture, CohortFixture, FixtureSpec};
use beaconql_core::llm::{ChatProvider, MockProvider, MockScript};
use beaconql_core::mock_beacon::MockBeacon;
use serde_json::Value;
use tower::ServiceExt;

pub const BEACON_TOKEN: &str = "beacon-token";

pub fn fixture() -> CohortFixture {
    generate_fixture(&FixtureSpec::default_spec()).unwrap()
}

pub type Recorder = Arc<RecordingTransport<LocalTransport>>;

pub struct Harness {
    pub app: Router,
    pub transport: Recorder,
    /// Token the in-process Beacon accepts.
    pub token: String,
}

pub fn harness_with(script: MockScript, token: &str, analytics: AnalyticsConfig) -> Harness {
    let beacon = Arc::new(MockBeacon::new(fixture()));
    let transport = Arc::new(RecordingTransport::new(LocalTransport::new(beacon, token)));
    let provider: Arc<dyn ChatProvider> = Arc::new(MockProvider::new(script));
    let options = ServiceOptions { analytics, ..Default::default() };
    let state = AppState::new(provider, transport.clone(), options).unwrap();
    Harness { app: router(state), transport, token: token.into() }
}

pub fn harness() -> Harness {
    harness_with(shipped_script(), BEACON_TOKEN, AnalyticsConfig::default())
}

pub struct Reply {
    pub status: StatusCode,
    pub bytes: Vec<u8>,
    pub content_type: Option<String>,
}

impl Reply {
    pub fn json(&self) -> Value {
        serde_json::from_slice(&self.bytes).unwrap_or_else(|e| panic!("not JSON ({e}): {}", String::from_utf8_lossy(&self.bytes)))
    }
}

pub async fn call(app: &Router, method: &str, path: &str, token: Option<&str>, body: Option<Value>) -> Reply {
    let mut req = Request::builder().method(method).uri(path);
    if let Some(t) = token {
        req = req.header("authorization", format!("Bearer {t}"));
    }
    let body = match body {
        Some(v) => {
            req = req.header("content-type", "application/json");
            Body::from(serde_json::to_vec(&v).unwrap())
        }
        None => Body::empty(),
    };
    let response = app.clone().oneshot(req.body(body).unwrap()).await.unwrap();
    let status = response.status();
    let content_type = response.headers().get("content-type").map(|v| v.to_str().unwrap().to_string());
    let bytes = axum::body::to_bytes(response.into_body(), usize::MAX).await.unwrap().to_vec();
    Reply { status, bytes, content_type }
}

/// Opens a session with one tab; returns the tab's base path.
pub async fn open(app: &Router, token: &str) -> String {
    let s = call(app, "POST", "/sessions", Some(token), None).await.json();
    let session = s["session"].as_str().unwrap().to_string();
    let t = call(app, "POST", &format!("/sessions/{session}/tabs"), Some(token), None).await.json();
    format!("/sessions/{session}/tabs/{}", t["tab"].as_str().unwrap())
}

/// Karyotypic-sex tally of a confirm response carrying records.
pub fn tally(result: &Value) -> std::collections::BTreeMap<String, usize> {
    let frame = &result["result"]["result"];
    let columns = frame["columns"].as_array().unwrap();
    let col = columns.iter().position(|c| c["name"] == "karyotypic_sex").unwrap();
    let mut out = std::collections::BTreeMap::new();
    for row in frame["rows"].as_array().unwrap() {
        *out.entry(row[col].as_str().unwrap().to_string()).or_insert(0) += 1;
    }
    out
}
