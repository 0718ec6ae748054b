//! Fluent client that executes confirmed queries against a Beacon endpoint.

use std::sync::{Arc, Mutex};
use std::time::Duration;

use beaconql_core::frame::{FrameError, QueryResult, ResultFrame, DEFAULT_ROW_CAP};
use beaconql_core::mock_beacon::{BeaconError, MockBeacon};
use beaconql_core::model::{BeaconQuery, Filter, FilterType, Granularity, PayloadError, Scope, VariantParams};
use beaconql_core::payload::{build_payload, parse_response};
use serde_json::Value;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SdkError {
    #[error("scope must be concrete, got `{0}`")]
    InvalidScope(Scope),
    #[error("filter term is empty")]
    EmptyFilter,
    #[error("invalid interval: {0}")]
    InvalidInterval(String),
    #[error(transparent)]
    Payload(#[from] PayloadError),
    #[error("beacon rejected the credentials")]
    Unauthorized,
    #[error("beacon answered HTTP {status}")]
    HttpError { status: u16, body: String },
    #[error("beacon unreachable: {0}")]
    Transport(String),
    #[error(transparent)]
    Frame(#[from] FrameError),
}

/// Moves one request body to a Beacon and returns its JSON answer.
pub trait BeaconTransport: Send + Sync {
    fn post(&self, scope: Scope, payload: &Value, bearer: &str) -> Result<Value, SdkError>;
}

impl<T: BeaconTransport + ?Sized> BeaconTransport for Arc<T> {
    fn post(&self, scope: Scope, payload: &Value, bearer: &str) -> Result<Value, SdkError> {
        (**self).post(scope, payload, bearer)
    }
}

/// POSTs to `{endpoint}/{scope}` with `Authorization: Bearer <token>`.
pub struct HttpTransport {
    endpoint: String,
    agent: ureq::Agent,
}

impl HttpTransport {
    pub fn new(endpoint: &str, timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        HttpTransport { endpoint: endpoint.trim_end_matches('/').to_string(), agent }
    }
}

impl BeaconTransport for HttpTransport {
    fn post(&self, scope: Scope, payload: &Value, bearer: &str) -> Result<Value, SdkError> {
        let url = format!("{}/{}", self.endpoint, scope.as_str());
        let mut response = self
            .agent
            .post(&url)
            .header("Authorization", &format!("Bearer {bearer}"))
            .send_json(payload)
            .map_err(|e| SdkError::Transport(e.to_string()))?;
        let status = response.status().as_u16();
        let body = response
            .body_mut()
            .with_config()
            .limit(64 << 20)
            .read_to_string()
            .map_err(|e| SdkError::Transport(e.to_string()))?;
        match status {
            200..=299 => serde_json::from_str(&body).map_err(|e| SdkError::Payload(PayloadError::Malformed(e.to_string()))),
            401 | 403 => Err(SdkError::Unauthorized),
            _ => Err(SdkError::HttpError { status, body }),
        }
    }
}

/// In-process transport over a [`MockBeacon`], with the same token check as
/// the HTTP server.
pub struct LocalTransport {
    beacon: Arc<MockBeacon>,
    token: String,
}

impl LocalTransport {
    pub fn new(beacon: Arc<MockBeacon>, token: impl Into<String>) -> Self {
        LocalTransport { beacon, token: token.into() }
    }
}

impl BeaconTransport for LocalTransport {
    fn post(&self, scope: Scope, payload: &Value, bearer: &str) -> Result<Value, SdkError> {
        if bearer != self.token {
            return Err(SdkError::Unauthorized);
        }
        self.beacon.answer(scope, payload).map_err(|BeaconError::BadRequest(e)| SdkError::HttpError {
            status: 400,
            body: e.to_string(),
        })
    }
}

/// One outbound call as seen by [`RecordingTransport`].
#[derive(Debug, Clone, PartialEq)]
pub struct RecordedCall {
    pub scope: Scope,
    pub payload: Value,
    pub bearer: String,
}

/// Wraps a transport and keeps every call it forwards.
pub struct RecordingTransport<T> {
    inner: T,
    calls: Mutex<Vec<RecordedCall>>,
}

impl<T> RecordingTransport<T> {
    pub fn new(inner: T) -> Self {
        RecordingTransport { inner, calls: Mutex::new(Vec::new()) }
    }

    pub fn calls(&self) -> Vec<RecordedCall> {
        self.calls.lock().unwrap().clone()
    }
}

impl<T: BeaconTransport> BeaconTransport for RecordingTransport<T> {
    fn post(&self, scope: Scope, payload: &Value, bearer: &str) -> Result<Value, SdkError> {
        self.calls.lock().unwrap().push(RecordedCall { scope, payload: payload.clone(), bearer: bearer.to_string() });
        self.inner.post(scope, payload, bearer)
    }
}

/// Immutable query builder; every `with_*` returns a new builder.
#[derive(Clone)]
pub struct QueryBuilder {
    transport: Arc<dyn BeaconTransport>,
    auth_token: String,
    partial: BeaconQuery,
    row_cap: usize,
}

impl std::fmt::Debug for QueryBuilder {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("QueryBuilder").field("partial", &self.partial).finish_non_exhaustive()
    }
}

impl QueryBuilder {
    pub fn new(transport: Arc<dyn BeaconTransport>, auth_token: impl Into<String>) -> Self {
        QueryBuilder {
            transport,
            auth_token: auth_token.into(),
            partial: BeaconQuery::new(Scope::Unknown, Granularity::Unknown),
            row_cap: DEFAULT_ROW_CAP,
        }
    }

    /// Starts from a confirmed query.
    pub fn from_query(transport: Arc<dyn BeaconTransport>, auth_token: impl Into<String>, query: BeaconQuery) -> Self {
        QueryBuilder { partial: query, ..QueryBuilder::new(transport, auth_token) }
    }

    pub fn query(&self) -> &BeaconQuery {
        &self.partial
    }

    pub fn with_row_cap(&self, cap: usize) -> Self {
        QueryBuilder { row_cap: cap, ..self.clone() }
    }

    pub fn with_scope(&self, scope: Scope) -> Result<Self, SdkError> {
        if !scope.is_concrete() {
            return Err(SdkError::InvalidScope(scope));
        }
        let mut next = self.clone();
        next.partial.scope = scope;
        Ok(next)
    }

    /// Appends a filter. Ontology terms travel as ids, alphanumeric terms as
    /// values, custom terms as plain terms.
    pub fn with_filter(&self, filter_type: FilterType, term: &str, scope: Scope) -> Result<Self, SdkError> {
        let term = term.trim();
        if term.is_empty() {
            return Err(SdkError::EmptyFilter);
        }
        let text = Some(term.to_string());
        let filter = match filter_type {
            FilterType::Ontology => Filter { filter_type, id: text, value: None, term: None, scope },
            FilterType::Alphanumeric => Filter { filter_type, id: None, value: text, term: None, scope },
            FilterType::Custom => Filter { filter_type, id: None, value: None, term: text, scope },
        };
        self.with_filter_value(filter)
    }

    pub fn with_filter_value(&self, filter: Filter) -> Result<Self, SdkError> {
        filter.validate().map_err(|_| SdkError::EmptyFilter)?;
        let mut next = self.clone();
        next.partial.filters.push(filter);
        Ok(next)
    }

    pub fn with_variant(&self, params: VariantParams) -> Result<Self, SdkError> {
        params.validate().map_err(|e| match e {
            PayloadError::InvalidInterval(m) => SdkError::InvalidInterval(m),
            other => SdkError::Payload(other),
        })?;
        let mut next = self.clone();
        next.partial.variant = Some(params);
        Ok(next)
    }

    /// The exact body [`fetch`](Self::fetch) sends.
    pub fn payload(&self, granularity: Granularity) -> Result<Value, SdkError> {
        let query = BeaconQuery { granularity, ..self.partial.clone() };
        Ok(build_payload(&query)?)
    }

    pub fn fetch(&self, granularity: Granularity) -> Result<QueryResult, SdkError> {
        let payload = self.payload(granularity)?;
        let body = self.transport.post(self.partial.scope, &payload, &self.auth_token)?;
        let response = parse_response(granularity, &body)?;
        Ok(match granularity {
            Granularity::Boolean => QueryResult::Boolean(response.exists.unwrap_or(false)),
            Granularity::Count => QueryResult::Count(response.count.unwrap_or(0)),
            _ => {
                let records = response.records.unwrap_or_default();
                QueryResult::Record(ResultFrame::from_records(&records, self.row_cap)?)
            }
        })
    }
}
