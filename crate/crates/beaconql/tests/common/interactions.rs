//! Randomized request sequences against the in-process service.

use axum::http::StatusCode;
use proptest::prelude::*;
use serde_json::{json, Value};

use super::{call, harness, Harness, BEACON_TOKEN};

pub const QUESTIONS: [&str; 9] = [
    "I want to study how sex differences affect individuals with disease",
    "Which individuals have Parkinson's disease?",
    "Which of them carry the SNCA variant at position 89704960 on chromosome 4?",
    "And the RPL10 variant at position 154398005 on chromosome X?",
    "How many individuals carry this variant?",
    "Are there any biosamples from liver tissue?",
    "What variants are found on chromosome 7 between 500k to 510k?",
    "What is the best pizza topping?",
    "Hello",
];

/// Inbound bearers: absent, the one the Beacon accepts, and two it rejects.
pub const TOKENS: [Option<&str>; 4] = [None, Some(BEACON_TOKEN), Some("wrong"), Some("another-user")];

const GRANULARITIES: [Option<&str>; 4] = [None, Some("record"), Some("count"), Some("boolean")];

#[derive(Debug, Clone)]
pub enum Op {
    Ask { tab: usize, question: usize, multistep: bool, token: usize },
    Confirm { tab: usize, granularity: usize, token: usize },
    View { tab: usize, token: usize },
    Analyze { tab: usize, token: usize },
}

impl Op {
    pub fn tab(&self) -> usize {
        match self {
            Op::Ask { tab, .. } | Op::Confirm { tab, .. } | Op::View { tab, .. } | Op::Analyze { tab, .. } => *tab,
        }
    }

    fn token(&self) -> Option<&'static str> {
        match self {
            Op::Ask { token, .. } | Op::Confirm { token, .. } | Op::View { token, .. } | Op::Analyze { token, .. } => TOKENS[*token],
        }
    }
}

pub fn op(tabs: usize) -> impl Strategy<Value = Op> {
    let tab = 0..tabs;
    let token = 0..TOKENS.len();
    prop_oneof![
        4 => (tab.clone(), 0..QUESTIONS.len(), any::<bool>(), token.clone())
            .prop_map(|(tab, question, multistep, token)| Op::Ask { tab, question, multistep, token }),
        4 => (tab.clone(), 0..GRANULARITIES.len(), token.clone()).prop_map(|(tab, granularity, token)| Op::Confirm { tab, granularity, token }),
        1 => (tab.clone(), token.clone()).prop_map(|(tab, token)| Op::View { tab, token }),
        1 => (tab, token).prop_map(|(tab, token)| Op::Analyze { tab, token }),
    ]
}

pub fn ops(tabs: usize, len: std::ops::Range<usize>) -> impl Strategy<Value = Vec<Op>> {
    proptest::collection::vec(op(tabs), len)
}

async fn open_tabs(app: &axum::Router, n: usize) -> Vec<String> {
    let s = call(app, "POST", "/sessions", Some("t"), None).await.json();
    let session = s["session"].as_str().unwrap().to_string();
    let mut tabs = Vec::new();
    for _ in 0..n {
        let t = call(app, "POST", &format!("/sessions/{session}/tabs"), Some("t"), None).await.json();
        tabs.push(format!("/sessions/{session}/tabs/{}", t["tab"].as_str().unwrap()));
    }
    tabs
}

/// Drops the tab id and latencies, which differ between identical runs.
fn stable(mut v: Value) -> Value {
    if let Value::Object(map) = &mut v {
        map.remove("id");
    }
    fn walk(v: &mut Value) {
        match v {
            Value::Object(map) => {
                map.remove("latency");
                map.values_mut().for_each(walk);
            }
            Value::Array(items) => items.iter_mut().for_each(walk),
            _ => {}
        }
    }
    walk(&mut v);
    v
}

async fn send(h: &Harness, tabs: &[String], op: &Op) -> (StatusCode, Value) {
    let base = &tabs[op.tab()];
    let token = op.token();
    let reply = match op {
        Op::Ask { question, multistep, .. } => {
            let workflow = if *multistep { "multistep" } else { "parallel" };
            let body = json!({ "question": QUESTIONS[*question], "workflow": workflow });
            call(&h.app, "POST", &format!("{base}/question"), token, Some(body)).await
        }
        Op::Confirm { granularity, .. } => {
            let body = GRANULARITIES[*granularity].map(|g| json!({ "granularity": g }));
            call(&h.app, "POST", &format!("{base}/confirm"), token, body).await
        }
        Op::View { .. } => call(&h.app, "GET", base, token, None).await,
        Op::Analyze { .. } => {
            let body = json!({ "request": "Plot a pie chart for karyotypic sex" });
            call(&h.app, "POST", &format!("{base}/analysis"), token, Some(body)).await
        }
    };
    let body = if reply.bytes.is_empty() { Value::Null } else { reply.json() };
    (reply.status, stable(body))
}

/// Beacon calls happen only on confirm, one per executed confirm, carrying
/// the caller's bearer unchanged.
pub async fn checkpoint_and_bearer(ops: &[Op]) -> Result<usize, String> {
    let h = harness();
    let tabs = open_tabs(&h.app, 2).await;
    let mut executed = 0;
    for (i, op) in ops.iter().enumerate() {
        let before = h.transport.calls().len();
        let (status, body) = send(&h, &tabs, op).await;
        let calls = h.transport.calls();
        let new = &calls[before..];
        let reached_beacon = matches!(op, Op::Confirm { .. }) && (status == StatusCode::OK || status == StatusCode::BAD_GATEWAY);
        if !reached_beacon {
            if !new.is_empty() {
                return Err(format!("op {i} {op:?} answered {status} yet made {} Beacon calls", new.len()));
            }
            continue;
        }
        executed += 1;
        let [recorded] = new else {
            return Err(format!("op {i} {op:?}: {} Beacon calls for one confirm", new.len()));
        };
        if Some(recorded.bearer.as_str()) != op.token() {
            return Err(format!("op {i}: outbound bearer {:?} != inbound {:?}", recorded.bearer, op.token()));
        }
        if status == StatusCode::OK && body["payload"] != recorded.payload {
            return Err(format!("op {i}: shown payload differs from the one sent"));
        }
        if status == StatusCode::BAD_GATEWAY && op.token() == Some(BEACON_TOKEN) {
            return Err(format!("op {i}: accepted token yet upstream failed: {body}"));
        }
    }
    if h.transport.calls().len() != executed {
        return Err("Beacon calls outside confirm".into());
    }
    Ok(executed)
}

/// Tab 0's replies and final view do not depend on what happens in tab 1.
pub async fn tab_isolation(ops: &[Op]) -> Result<(), String> {
    let shared = harness();
    let tabs = open_tabs(&shared.app, 2).await;
    let mut seen = Vec::new();
    for op in ops {
        let reply = send(&shared, &tabs, op).await;
        if op.tab() == 0 {
            seen.push(reply);
        }
    }
    let alone = harness();
    let solo = open_tabs(&alone.app, 1).await;
    let mine: Vec<Op> = ops.iter().filter(|op| op.tab() == 0).cloned().collect();
    for (i, op) in mine.iter().enumerate() {
        let reply = send(&alone, &solo, op).await;
        if reply != seen[i] {
            return Err(format!("reply {i} to {op:?} differs: {:?} vs {:?}", seen[i], reply));
        }
    }
    let view = |h: &Harness, tab: &str| {
        let (app, tab) = (h.app.clone(), tab.to_string());
        async move { stable(call(&app, "GET", &tab, Some("t"), None).await.json()) }
    };
    if view(&shared, &tabs[0]).await != view(&alone, &solo[0]).await {
        return Err("final tab views differ".into());
    }
    Ok(())
}

pub fn block_on<F: std::future::Future>(f: F) -> F::Output {
    tokio::runtime::Builder::new_current_thread().enable_all().build().unwrap().block_on(f)
}
