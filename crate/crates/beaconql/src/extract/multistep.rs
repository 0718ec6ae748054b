//! Sequential chain: scope, granularity, schema, text-to-SQL, SQL parse.
//! The chain stops at the first failure.

use beaconql_core::bird::{render_schema, SchemaDoc};
use beaconql_core::draft::{ExtractionDraft, Field, FieldStatus, Validity, Workflow};
use beaconql_core::llm::{complete, ChatProvider, LlmExchange, ResponseFormat};
use beaconql_core::model::{Filter, Granularity, Scope, VariantParams};
use beaconql_core::sql::{ground_filters, parse_sql_fields, SqlExtraction};
use beaconql_core::template::{ids, TemplateRegistry};
use serde::{Deserialize, Serialize};

pub const STEP_SCOPE: &str = "scope";
pub const STEP_GRANULARITY: &str = "granularity";
pub const STEP_SCHEMA: &str = "schema";
pub const STEP_TEXT2SQL: &str = "text2sql";
pub const STEP_PARSE: &str = "parse";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceStep {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exchange: Option<LlmExchange>,
    /// What a local step produced, or why it failed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    pub ok: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepTrace {
    pub steps: Vec<TraceStep>,
    pub terminated_at: Option<String>,
}

impl StepTrace {
    fn llm(&mut self, name: &str, exchange: LlmExchange, ok: bool) {
        self.steps.push(TraceStep { name: name.into(), exchange: Some(exchange), note: None, ok });
        if !ok {
            self.terminated_at = Some(name.into());
        }
    }

    fn local(&mut self, name: &str, note: String, ok: bool) {
        self.steps.push(TraceStep { name: name.into(), exchange: None, note: Some(note), ok });
        if !ok {
            self.terminated_at = Some(name.into());
        }
    }

    pub fn exchanges(&self) -> impl Iterator<Item = &LlmExchange> {
        self.steps.iter().filter_map(|s| s.exchange.as_ref())
    }

    pub fn step(&self, name: &str) -> Option<&TraceStep> {
        self.steps.iter().find(|s| s.name == name)
    }
}

/// Reduces a free-text classification to a bare label: trims, lowercases,
/// drops quotes and punctuation, and unwraps a one-field JSON object.
pub fn normalize_label(text: &str) -> String {
    let trimmed = text.trim();
    if let Ok(serde_json::Value::Object(obj)) = serde_json::from_str::<serde_json::Value>(trimmed) {
        if let (1, Some(serde_json::Value::String(s))) = (obj.len(), obj.values().next()) {
            return normalize_label(s);
        }
    }
    let first_line = trimmed.lines().find(|l| !l.trim().is_empty()).unwrap_or("");
    let lower = first_line.trim().to_lowercase();
    let lower = lower.strip_prefix("scope:").or_else(|| lower.strip_prefix("category:")).unwrap_or(&lower);
    lower
        .trim_matches(|c: char| !(c.is_alphanumeric() || c == '_'))
        .replace([' ', '-'], "_")
}

fn classify<T: std::str::FromStr + Copy>(
    id: &str,
    question: &str,
    unknown: T,
    provider: &dyn ChatProvider,
    registry: &TemplateRegistry,
) -> (Option<T>, LlmExchange) {
    let prompt = registry.render_with(id, &[("input", question)]).expect("builtin template renders");
    let exchange = complete(provider, &prompt, ResponseFormat::Text);
    if exchange.is_transport_failure() {
        return (None, exchange);
    }
    let label = normalize_label(&exchange.raw_text);
    let value = label.parse::<T>().unwrap_or(unknown);
    (Some(value), exchange)
}

/// `None` when the completion failed in transport.
pub fn classify_scope(question: &str, provider: &dyn ChatProvider, registry: &TemplateRegistry) -> (Option<Scope>, LlmExchange) {
    classify(ids::MULTISTEP_SCOPE, question, Scope::Unknown, provider, registry)
}

pub fn classify_granularity(
    question: &str,
    provider: &dyn ChatProvider,
    registry: &TemplateRegistry,
) -> (Option<Granularity>, LlmExchange) {
    classify(ids::MULTISTEP_GRANULARITY, question, Granularity::Unknown, provider, registry)
}

/// Strips a Markdown code fence and a leading `SQL QUERY:` label.
pub fn clean_sql(text: &str) -> String {
    let mut s = text.trim();
    if let Some(rest) = s.strip_prefix("```") {
        let rest = rest.strip_prefix("sql").or_else(|| rest.strip_prefix("SQL")).unwrap_or(rest);
        s = rest.trim_end().strip_suffix("```").unwrap_or(rest).trim();
    }
    s.strip_prefix("SQL QUERY:").unwrap_or(s).trim().to_string()
}

pub fn generate_sql(question: &str, schema: &SchemaDoc, provider: &dyn ChatProvider, registry: &TemplateRegistry) -> LlmExchange {
    let prompt = registry
        .render_with(ids::MULTISTEP_TEXT2SQL, &[("schema", schema.text.as_str()), ("input", question)])
        .expect("builtin template renders");
    complete(provider, &prompt, ResponseFormat::Text)
}

struct Partial {
    scope: Field<Scope>,
    granularity: Field<Granularity>,
    variant: Field<Option<VariantParams>>,
    filters: Field<Vec<Filter>>,
    residue: Vec<String>,
}

impl Partial {
    fn new() -> Self {
        Partial {
            scope: Field { value: Scope::Unknown, status: FieldStatus::early_termination() },
            granularity: Field { value: Granularity::Unknown, status: FieldStatus::early_termination() },
            variant: Field { value: None, status: FieldStatus::early_termination() },
            filters: Field { value: Vec::new(), status: FieldStatus::early_termination() },
            residue: Vec::new(),
        }
    }
}

fn reason(exchange: &LlmExchange) -> String {
    exchange.failure_code().unwrap_or_else(|| "transport".into())
}

/// Runs the chain. A question that maps to no scope is rejected; a failed
/// scope step fails closed.
pub fn extract_multistep(question: &str, provider: &dyn ChatProvider, registry: &TemplateRegistry) -> (ExtractionDraft, StepTrace) {
    let mut trace = StepTrace::default();
    let mut out = Partial::new();
    let mut validity = Validity::accepted("question maps to a Beacon scope");

    'chain: {
        let (scope, exchange) = classify_scope(question, provider, registry);
        match scope {
            None => {
                out.scope = Field::failed(Scope::Unknown, reason(&exchange));
                validity = Validity::unavailable();
                trace.llm(STEP_SCOPE, exchange, false);
                break 'chain;
            }
            Some(Scope::Unknown) => {
                out.scope = Field::unknown(Scope::Unknown);
                validity = Validity::rejected("the question does not ask for any Beacon entity");
                trace.llm(STEP_SCOPE, exchange, false);
                break 'chain;
            }
            Some(scope) => {
                out.scope = Field::known(scope);
                trace.llm(STEP_SCOPE, exchange, true);
            }
        }
        let scope = out.scope.value;

        let (granularity, exchange) = classify_granularity(question, provider, registry);
        match granularity {
            None => {
                out.granularity = Field::failed(Granularity::Unknown, reason(&exchange));
                trace.llm(STEP_GRANULARITY, exchange, false);
                break 'chain;
            }
            Some(g) => {
                out.granularity = beaconql_core::draft::granularity_field(g);
                trace.llm(STEP_GRANULARITY, exchange, true);
            }
        }

        let schema = match render_schema(scope) {
            Ok(schema) => {
                trace.local(STEP_SCHEMA, format!("{} schema", scope), true);
                schema
            }
            Err(e) => {
                trace.local(STEP_SCHEMA, e.to_string(), false);
                break 'chain;
            }
        };

        let exchange = generate_sql(question, &schema, provider, registry);
        if exchange.is_transport_failure() {
            trace.llm(STEP_TEXT2SQL, exchange, false);
            break 'chain;
        }
        let sql = clean_sql(&exchange.raw_text);
        trace.llm(STEP_TEXT2SQL, exchange, true);

        match parse_sql_fields(&sql, scope) {
            Ok(mut extraction) => {
                ground_filters(&mut extraction, question, &schema.text);
                trace.local(STEP_PARSE, summary(&extraction), true);
                let SqlExtraction { variant, filters, residue, .. } = extraction;
                out.variant = Field::known(variant);
                out.filters = Field::known(filters);
                out.residue = residue;
            }
            Err(e) => trace.local(STEP_PARSE, e.to_string(), false),
        }
    }

    let exchanges: Vec<LlmExchange> = trace.exchanges().cloned().collect();
    let draft = ExtractionDraft {
        question: question.to_string(),
        workflow: Workflow::Multistep,
        validity,
        scope: out.scope,
        granularity: out.granularity,
        variant: out.variant,
        filters: out.filters,
        residue: out.residue,
        total_usage: ExtractionDraft::usage_of(&exchanges),
        exchanges,
    };
    (draft, trace)
}

fn summary(x: &SqlExtraction) -> String {
    format!(
        "{} variant, {} filter, {} residue predicates",
        x.predicates.iter().filter(|p| p.class == beaconql_core::sql::PredicateClass::Variant).count(),
        x.filters.len(),
        x.residue.len()
    )
}
