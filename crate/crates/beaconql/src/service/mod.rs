//! HTTP API: sessions of isolated tabs, each walking question → card →
//! confirm → fetch → optional analysis with code review.
//!
//! Every route needs `Authorization: Bearer <token>`. The token is handed to
//! the Beacon on confirm and is never stored.

pub mod error;
pub mod events;

use std::collections::{BTreeMap, HashMap};
use std::hash::{BuildHasher, Hasher};
use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::extract::{FromRequestParts, Path, State};
use axum::http::request::Parts;
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use beaconql_core::codegen::{build_codegen_prompt, frame_schemas};
use beaconql_core::decode::{decode_into, OutputSchema, Structured};
use beaconql_core::draft::Workflow;
use beaconql_core::guard::{guard_script, ScriptArtifact, VettedScript};
use beaconql_core::llm::{complete, ChatProvider, ResponseFormat};
use beaconql_core::payload::build_payload;
use beaconql_core::session::{CardEdits, CodeReview, Tab};
use beaconql_core::template::TemplateRegistry;
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::{json, Value};

use crate::analytics::run_script;
use crate::config::AnalyticsConfig;
use crate::extract::{extract, StepTrace};
use crate::sdk::{BeaconTransport, QueryBuilder};

pub use error::ApiError;
pub use events::EventLog;

/// The caller's bearer token, required on every route.
pub struct Bearer(pub String);

impl<S: Send + Sync> FromRequestParts<S> for Bearer {
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, _: &S) -> Result<Self, Self::Rejection> {
        crate::beacon_server::bearer(&parts.headers)
            .map(|t| Bearer(t.to_string()))
            .ok_or_else(ApiError::unauthorized)
    }
}

/// JSON body with `{code, message, detail}` rejections. An empty body reads
/// as `{}`.
pub struct Body<T>(pub T);

impl<T: DeserializeOwned, S: Send + Sync> axum::extract::FromRequest<S> for Body<T> {
    type Rejection = ApiError;

    async fn from_request(req: axum::extract::Request, state: &S) -> Result<Self, Self::Rejection> {
        let bytes = Bytes::from_request(req, state).await.map_err(|e| ApiError::bad_request(e.to_string()))?;
        let bytes: &[u8] = if bytes.iter().all(u8::is_ascii_whitespace) { b"{}" } else { &bytes };
        serde_json::from_slice(bytes).map(Body).map_err(|e| ApiError::bad_request(format!("invalid body: {e}")))
    }
}

pub struct ServiceOptions {
    pub workflow: Workflow,
    pub analytics: AnalyticsConfig,
    pub event_log: Option<EventLog>,
}

impl Default for ServiceOptions {
    fn default() -> Self {
        ServiceOptions { workflow: Workflow::Parallel, analytics: AnalyticsConfig::default(), event_log: None }
    }
}

#[derive(Debug)]
pub struct TabEntry {
    pub tab: Tab,
    /// Files from the latest runs, by file name.
    pub files: BTreeMap<String, Vec<u8>>,
    pub trace: Option<StepTrace>,
}

impl TabEntry {
    fn new(tab: Tab) -> Self {
        TabEntry { tab, files: BTreeMap::new(), trace: None }
    }
}

#[derive(Default)]
struct Session {
    tabs: BTreeMap<String, Arc<Mutex<TabEntry>>>,
    next_tab: u64,
}

impl Session {
    fn open_tab(&mut self) -> (String, Arc<Mutex<TabEntry>>) {
        self.next_tab += 1;
        let id = format!("t{}", self.next_tab);
        let entry = Arc::new(Mutex::new(TabEntry::new(Tab::new(id.clone()))));
        self.tabs.insert(id.clone(), entry.clone());
        (id, entry)
    }
}

struct Inner {
    sessions: Mutex<HashMap<String, Session>>,
    provider: Arc<dyn ChatProvider>,
    transport: Arc<dyn BeaconTransport>,
    registry: TemplateRegistry,
    options: ServiceOptions,
}

#[derive(Clone)]
pub struct AppState(Arc<Inner>);

impl AppState {
    /// Sessions found in the event log, if any, are restored.
    pub fn new(provider: Arc<dyn ChatProvider>, transport: Arc<dyn BeaconTransport>, options: ServiceOptions) -> std::io::Result<Self> {
        let mut sessions = HashMap::new();
        if let Some(log) = &options.event_log {
            for (id, tabs) in log.recover()? {
                let next_tab = tabs.keys().filter_map(|t| t.strip_prefix('t')?.parse::<u64>().ok()).max().unwrap_or(0);
                let tabs = tabs
                    .into_iter()
                    .map(|(tid, tab)| (tid, Arc::new(Mutex::new(TabEntry::new(tab)))))
                    .collect();
                sessions.insert(id, Session { tabs, next_tab });
            }
        }
        Ok(AppState(Arc::new(Inner {
            sessions: Mutex::new(sessions),
            provider,
            transport,
            registry: TemplateRegistry::builtin(),
            options,
        })))
    }

    fn tab(&self, session: &str, tab: &str) -> Result<Arc<Mutex<TabEntry>>, ApiError> {
        let sessions = self.0.sessions.lock().unwrap();
        let s = sessions.get(session).ok_or_else(|| ApiError::unknown_session(session))?;
        s.tabs.get(tab).cloned().ok_or_else(|| ApiError::unknown_tab(tab))
    }

    fn log(&self, session: &str, event: &str, tab: &Tab) {
        if let Some(log) = &self.0.options.event_log {
            if let Err(e) = log.append(session, event, tab) {
                eprintln!("event log for session {session}: {e}");
            }
        }
    }
}

fn fresh_id() -> String {
    let mut hasher = std::collections::hash_map::RandomState::new().build_hasher();
    hasher.write_u128(std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).unwrap_or_default().as_nanos());
    format!("{:016x}", hasher.finish())
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, ApiError> + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f).await.map_err(|e| ApiError::internal(e.to_string()))?
}

fn tab_view(entry: &TabEntry) -> Value {
    let mut view = serde_json::to_value(&entry.tab).expect("tab serializes");
    view["files"] = json!(entry.files.keys().collect::<Vec<_>>());
    view
}

async fn create_session(State(app): State<AppState>, _: Bearer) -> (StatusCode, Json<Value>) {
    let id = fresh_id();
    app.0.sessions.lock().unwrap().insert(id.clone(), Session::default());
    if let Some(log) = &app.0.options.event_log {
        if let Err(e) = log.touch(&id) {
            eprintln!("event log for session {id}: {e}");
        }
    }
    (StatusCode::CREATED, Json(json!({ "session": id, "tabs": [] })))
}

async fn open_tab(State(app): State<AppState>, _: Bearer, Path(session): Path<String>) -> Result<(StatusCode, Json<Value>), ApiError> {
    let (id, entry) = {
        let mut sessions = app.0.sessions.lock().unwrap();
        sessions.get_mut(&session).ok_or_else(|| ApiError::unknown_session(&session))?.open_tab()
    };
    let entry = entry.lock().unwrap();
    app.log(&session, "open_tab", &entry.tab);
    Ok((StatusCode::CREATED, Json(json!({ "tab": id, "state": entry.tab.state }))))
}

async fn list_tabs(State(app): State<AppState>, _: Bearer, Path(session): Path<String>) -> Result<Json<Value>, ApiError> {
    let entries: Vec<_> = {
        let sessions = app.0.sessions.lock().unwrap();
        sessions.get(&session).ok_or_else(|| ApiError::unknown_session(&session))?.tabs.values().cloned().collect()
    };
    blocking(move || {
        let tabs: Vec<Value> = entries
            .iter()
            .map(|e| {
                let e = e.lock().unwrap();
                json!({ "tab": e.tab.id, "state": e.tab.state })
            })
            .collect();
        Ok(Json(json!({ "session": session, "tabs": tabs })))
    })
    .await
}

async fn get_tab(State(app): State<AppState>, _: Bearer, Path((s, t)): Path<(String, String)>) -> Result<Json<Value>, ApiError> {
    let entry = app.tab(&s, &t)?;
    blocking(move || Ok(Json(tab_view(&entry.lock().unwrap())))).await
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct QuestionBody {
    question: String,
    #[serde(default)]
    workflow: Option<Workflow>,
}

async fn post_question(
    State(app): State<AppState>,
    _: Bearer,
    Path((s, t)): Path<(String, String)>,
    Body(body): Body<QuestionBody>,
) -> Result<Json<Value>, ApiError> {
    let question = body.question.trim().to_string();
    if question.is_empty() {
        return Err(ApiError::bad_request("question is empty"));
    }
    let entry = app.tab(&s, &t)?;
    let workflow = body.workflow.unwrap_or(app.0.options.workflow);
    blocking(move || {
        let mut entry = entry.lock().unwrap();
        if let Some(greeting) = entry.tab.greet(&question)? {
            let mut out = serde_json::to_value(greeting).expect("outcome");
            out["state"] = json!(entry.tab.state);
            return Ok(Json(out));
        }
        let (draft, trace) = extract(workflow, &question, app.0.provider.as_ref(), &app.0.registry);
        let outcome = entry.tab.post_question(&draft)?;
        app.log(&s, "question", &entry.tab);
        let mut out = serde_json::to_value(outcome).expect("outcome");
        out["state"] = json!(entry.tab.state);
        out["workflow"] = json!(workflow);
        out["usage"] = json!(draft.total_usage);
        if let Some(trace) = &trace {
            out["trace"] = json!(trace
                .steps
                .iter()
                .map(|s| json!({ "name": s.name, "ok": s.ok, "note": s.note }))
                .collect::<Vec<_>>());
        }
        entry.trace = trace;
        Ok(Json(out))
    })
    .await
}

async fn confirm(
    State(app): State<AppState>,
    Bearer(token): Bearer,
    Path((s, t)): Path<(String, String)>,
    Body(edits): Body<CardEdits>,
) -> Result<Json<Value>, ApiError> {
    let entry = app.tab(&s, &t)?;
    blocking(move || {
        let mut entry = entry.lock().unwrap();
        let query = entry.tab.confirm(edits)?;
        app.log(&s, "confirm", &entry.tab);
        let payload = build_payload(&query).map_err(|e| ApiError::internal(e.to_string()))?;
        let fetched = QueryBuilder::from_query(app.0.transport.clone(), token, query.clone()).fetch(query.granularity);
        match fetched {
            Ok(result) => {
                entry.tab.finish_execution(Ok(result.clone()))?;
                app.log(&s, "result", &entry.tab);
                Ok(Json(json!({ "state": entry.tab.state, "query": query, "payload": payload, "result": result })))
            }
            Err(e) => {
                entry.tab.finish_execution(Err(e.to_string()))?;
                app.log(&s, "fetch_failed", &entry.tab);
                Err(e.into())
            }
        }
    })
    .await
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct AnalysisBody {
    request: String,
}

async fn request_analysis(
    State(app): State<AppState>,
    _: Bearer,
    Path((s, t)): Path<(String, String)>,
    Body(body): Body<AnalysisBody>,
) -> Result<Json<Value>, ApiError> {
    let entry = app.tab(&s, &t)?;
    blocking(move || {
        let mut entry = entry.lock().unwrap();
        let frame = entry.tab.records()?.clone();
        let prompt = build_codegen_prompt(&app.0.registry, &frame_schemas(&[frame]), body.request.trim())
            .map_err(|e| ApiError::bad_request(e.to_string()))?;
        let mut exchange = complete(app.0.provider.as_ref(), &prompt, ResponseFormat::Json);
        if let Some(code) = exchange.failure_code() {
            return Err(ApiError::new(StatusCode::BAD_GATEWAY, "llm_unavailable", "the model did not answer")
                .with_detail(json!({ "reason": code })));
        }
        let artifact: ScriptArtifact = match decode_into(&mut exchange, OutputSchema::Codegen) {
            Ok(Structured::Codegen(result)) => result.into(),
            Ok(_) => unreachable!("codegen schema decodes to codegen"),
            Err(e) => {
                return Err(ApiError::new(StatusCode::BAD_GATEWAY, "decode_failed", e.to_string())
                    .with_detail(json!({ "raw": exchange.raw_text })))
            }
        };
        let guard = guard_script(&artifact, &app.0.options.analytics.guard());
        let review = CodeReview { artifact, guard };
        entry.tab.submit_for_review(review.clone())?;
        app.log(&s, "analysis", &entry.tab);
        Ok(Json(json!({
            "state": entry.tab.state,
            "artifact": review.artifact,
            "guard": review.guard,
            "usage": exchange.usage,
        })))
    })
    .await
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RunBody {
    #[serde(default)]
    code: Option<String>,
}

fn file_name(path: &str) -> String {
    path.rsplit('/').next().unwrap_or(path).to_string()
}

async fn run_analysis(
    State(app): State<AppState>,
    _: Bearer,
    Path((s, t)): Path<(String, String)>,
    Body(body): Body<RunBody>,
) -> Result<Json<Value>, ApiError> {
    let entry = app.tab(&s, &t)?;
    blocking(move || {
        let mut entry = entry.lock().unwrap();
        let mut artifact = entry.tab.can_run()?.artifact.clone();
        if let Some(code) = body.code {
            artifact.code = code;
        }
        let config = &app.0.options.analytics;
        let vetted = match VettedScript::vet(artifact.clone(), &config.guard()) {
            Ok(v) => v,
            Err(report) => {
                entry.tab.review = Some(CodeReview { artifact, guard: report.clone() });
                app.log(&s, "run_rejected", &entry.tab);
                return Err(ApiError::guard(report));
            }
        };
        let frame = entry.tab.records()?.clone();
        let result = run_script(&vetted, &[frame], config)?;
        let files: Vec<Value> = result
            .produced_files
            .iter()
            .map(|f| json!({ "path": f.path, "name": file_name(&f.path), "size": f.bytes.len() }))
            .collect();
        for f in &result.produced_files {
            entry.files.insert(file_name(&f.path), f.bytes.clone());
        }
        entry.tab.review = Some(CodeReview { artifact, guard: result.guard.clone() });
        let record = result.record();
        entry.tab.finish_run(record.clone())?;
        app.log(&s, "run", &entry.tab);
        Ok(Json(json!({
            "state": entry.tab.state,
            "execution": record,
            "executed_code": result.executed_code,
            "guard": result.guard,
            "truncated": result.truncated,
            "files": files,
        })))
    })
    .await
}

fn content_type(name: &str) -> &'static str {
    match name.rsplit('.').next().map(str::to_ascii_lowercase).as_deref() {
        Some("png") => "image/png",
        Some("jpg" | "jpeg") => "image/jpeg",
        Some("svg") => "image/svg+xml",
        Some("pdf") => "application/pdf",
        Some("csv") => "text/csv",
        Some("json") => "application/json",
        Some("txt") => "text/plain; charset=utf-8",
        Some("html") => "text/html; charset=utf-8",
        _ => "application/octet-stream",
    }
}

async fn artifact(
    State(app): State<AppState>,
    _: Bearer,
    Path((s, t, file)): Path<(String, String, String)>,
) -> Result<Response, ApiError> {
    let entry = app.tab(&s, &t)?;
    blocking(move || {
        let bytes = entry.lock().unwrap().files.get(&file).cloned();
        let bytes = bytes.ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "unknown_file", format!("no file `{file}`")))?;
        Ok(([(header::CONTENT_TYPE, content_type(&file))], bytes).into_response())
    })
    .await
}

async fn not_found(_: Bearer) -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, "not_found", "no such route")
}

pub fn router(app: AppState) -> Router {
    let tab = "/sessions/{s}/tabs/{t}";
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{s}/tabs", post(open_tab).get(list_tabs))
        .route(tab, get(get_tab))
        .route(&format!("{tab}/question"), post(post_question))
        .route(&format!("{tab}/confirm"), post(confirm))
        .route(&format!("{tab}/analysis"), post(request_analysis))
        .route(&format!("{tab}/analysis/run"), post(run_analysis))
        .route(&format!("{tab}/artifacts/{{file}}"), get(artifact))
        .fallback(not_found)
        .with_state(app)
}
