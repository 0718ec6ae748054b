//! Structured decoding of model output against the JSON skeletons that the
//! prompt templates ask for.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::draft::Validity;
use crate::llm::{DecodeStatus, LlmExchange};
use crate::model::{Chromosome, Granularity, Scope};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OutputSchema {
    #[serde(rename = "scope-result")]
    Scope,
    #[serde(rename = "granularity-result")]
    Granularity,
    #[serde(rename = "variants-result")]
    Variants,
    #[serde(rename = "filters-result")]
    Filters,
    #[serde(rename = "validity-result")]
    Validity,
    #[serde(rename = "codegen-result")]
    Codegen,
}

impl OutputSchema {
    pub const ALL: [OutputSchema; 6] = [
        OutputSchema::Scope,
        OutputSchema::Granularity,
        OutputSchema::Variants,
        OutputSchema::Filters,
        OutputSchema::Validity,
        OutputSchema::Codegen,
    ];

    pub fn id(self) -> &'static str {
        match self {
            OutputSchema::Scope => "scope-result",
            OutputSchema::Granularity => "granularity-result",
            OutputSchema::Variants => "variants-result",
            OutputSchema::Filters => "filters-result",
            OutputSchema::Validity => "validity-result",
            OutputSchema::Codegen => "codegen-result",
        }
    }
}

impl FromStr for OutputSchema {
    type Err = DecodeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        OutputSchema::ALL
            .into_iter()
            .find(|schema| schema.id() == s)
            .ok_or_else(|| DecodeError::UnknownSchema(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DecodeError {
    #[error("unknown output schema `{0}`")]
    UnknownSchema(String),
    #[error("exchange carries no text (transport failed)")]
    NoText,
    #[error("response is not JSON: {0}")]
    NotJson(String),
    #[error("schema violation at `{field}`: {reason}")]
    SchemaViolation { field: String, reason: String },
    #[error("`{field}` has value `{value}` outside its allowed set")]
    EnumViolation { field: String, value: String },
}

fn violation(field: &str, reason: impl Into<String>) -> DecodeError {
    DecodeError::SchemaViolation { field: field.into(), reason: reason.into() }
}

/// Output of the variant extractor. `None` stands for "unknown".
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariantsResult {
    pub success: bool,
    pub assembly_id: Option<String>,
    pub chromosome: Option<Chromosome>,
    pub start: Option<Vec<u64>>,
    pub end: Option<Vec<u64>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterProposal {
    pub term: String,
    pub scope: Scope,
}

/// Scopes the filter extractor may assign to a condition.
pub const FILTER_SCOPES: [Scope; 3] = [Scope::Individuals, Scope::Biosamples, Scope::Runs];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodegenResult {
    pub code: String,
    pub files: Vec<String>,
    pub assumptions: Vec<String>,
    pub feedback: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Structured {
    Scope(Scope),
    Granularity(Granularity),
    Variants(VariantsResult),
    Filters(Vec<FilterProposal>),
    Validity(Validity),
    Codegen(CodegenResult),
}

impl Structured {
    /// JSON in the same shape the decoder accepts.
    pub fn to_json(&self) -> Value {
        let unknown_or = |v: Option<Value>| v.unwrap_or_else(|| Value::String("unknown".into()));
        match self {
            Structured::Scope(scope) => json!({ "scope": scope.as_str() }),
            Structured::Granularity(g) => json!({ "granularity": g.as_str() }),
            Structured::Variants(v) => json!({
                "success": v.success,
                "assembly_id": unknown_or(v.assembly_id.clone().map(Value::String)),
                "chromosome": unknown_or(v.chromosome.as_ref().map(|c| Value::String(c.as_str().into()))),
                "start": unknown_or(v.start.as_ref().map(|s| json!(s))),
                "end": unknown_or(v.end.as_ref().map(|e| json!(e))),
            }),
            Structured::Filters(filters) => json!({
                "filters": filters
                    .iter()
                    .map(|f| json!({ "term": f.term, "scope": f.scope.as_str() }))
                    .collect::<Vec<_>>()
            }),
            Structured::Validity(v) => json!({ "yes": v.yes, "reason": v.reason }),
            Structured::Codegen(c) => json!({
                "code": c.code,
                "files": c.files,
                "assumptions": c.assumptions,
                "feedback": c.feedback,
            }),
        }
    }
}

/// Decodes an exchange's text against `schema`. Extra fields are rejected.
pub fn decode_structured(exchange: &LlmExchange, schema: OutputSchema) -> Result<Structured, DecodeError> {
    if exchange.decode_status == DecodeStatus::TransportFailed {
        return Err(DecodeError::NoText);
    }
    decode_text(&exchange.raw_text, schema)
}

/// Decodes and records the outcome on the exchange.
pub fn decode_into(exchange: &mut LlmExchange, schema: OutputSchema) -> Result<Structured, DecodeError> {
    let result = decode_structured(exchange, schema);
    if exchange.decode_status != DecodeStatus::TransportFailed {
        exchange.decode_status = if result.is_ok() { DecodeStatus::Ok } else { DecodeStatus::DecodeFailed };
    }
    result
}

pub fn decode_text(text: &str, schema: OutputSchema) -> Result<Structured, DecodeError> {
    let value: Value = serde_json::from_str(text.trim()).map_err(|e| DecodeError::NotJson(e.to_string()))?;
    let obj = value.as_object().ok_or_else(|| violation("$", "expected an object"))?;
    match schema {
        OutputSchema::Scope => {
            only_keys(obj, &["scope"])?;
            let label = required_str(obj, "scope")?;
            let scope = normalized_label(label)
                .parse::<Scope>()
                .map_err(|_| DecodeError::EnumViolation { field: "scope".into(), value: label.into() })?;
            Ok(Structured::Scope(scope))
        }
        OutputSchema::Granularity => {
            only_keys(obj, &["granularity"])?;
            let label = required_str(obj, "granularity")?;
            let granularity = normalized_label(label)
                .parse::<Granularity>()
                .map_err(|_| DecodeError::EnumViolation { field: "granularity".into(), value: label.into() })?;
            Ok(Structured::Granularity(granularity))
        }
        OutputSchema::Variants => decode_variants(obj).map(Structured::Variants),
        OutputSchema::Filters => decode_filters(obj).map(Structured::Filters),
        OutputSchema::Validity => {
            only_keys(obj, &["yes", "reason"])?;
            let yes = obj
                .get("yes")
                .ok_or_else(|| violation("yes", "missing"))?
                .as_bool()
                .ok_or_else(|| violation("yes", "expected a boolean"))?;
            let reason = match obj.get("reason") {
                None | Some(Value::Null) => String::new(),
                Some(Value::String(s)) => s.clone(),
                Some(_) => return Err(violation("reason", "expected a string")),
            };
            Ok(Structured::Validity(Validity { yes, reason }))
        }
        OutputSchema::Codegen => {
            only_keys(obj, &["code", "files", "assumptions", "feedback"])?;
            Ok(Structured::Codegen(CodegenResult {
                code: required_str(obj, "code")?.to_string(),
                files: string_list(obj, "files")?,
                assumptions: string_list(obj, "assumptions")?,
                feedback: string_list(obj, "feedback")?,
            }))
        }
    }
}

fn normalized_label(label: &str) -> String {
    label.trim().to_lowercase()
}

fn only_keys(obj: &Map<String, Value>, allowed: &[&str]) -> Result<(), DecodeError> {
    match obj.keys().find(|k| !allowed.contains(&k.as_str())) {
        Some(extra) => Err(violation(extra, "unexpected field")),
        None => Ok(()),
    }
}

fn required_str<'a>(obj: &'a Map<String, Value>, key: &str) -> Result<&'a str, DecodeError> {
    match obj.get(key) {
        Some(Value::String(s)) => Ok(s),
        Some(_) => Err(violation(key, "expected a string")),
        None => Err(violation(key, "missing")),
    }
}

fn string_list(obj: &Map<String, Value>, key: &str) -> Result<Vec<String>, DecodeError> {
    match obj.get(key) {
        None | Some(Value::Null) => Ok(Vec::new()),
        Some(Value::Array(items)) => items
            .iter()
            .map(|item| item.as_str().map(str::to_string))
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| violation(key, "expected a list of strings")),
        Some(_) => Err(violation(key, "expected a list")),
    }
}

fn is_unknown(value: &Value) -> bool {
    match value {
        Value::Null => true,
        Value::String(s) => {
            let s = s.trim();
            s.is_empty() || s.eq_ignore_ascii_case("unknown")
        }
        _ => false,
    }
}

/// Parses a base position, expanding `k`/`m` shorthand (`500k` is 500000,
/// `1.5M` is 1500000). Thousands separators are ignored.
pub fn parse_position(raw: &str) -> Option<u64> {
    let cleaned: String = raw.trim().chars().filter(|c| *c != ',' && *c != '_').collect();
    let lower = cleaned.to_lowercase();
    let lower = lower.strip_suffix("bp").unwrap_or(&lower);
    let (digits, scale) = if let Some(d) = lower.strip_suffix("kb").or_else(|| lower.strip_suffix('k')) {
        (d, 1_000u64)
    } else if let Some(d) = lower.strip_suffix("mb").or_else(|| lower.strip_suffix('m')) {
        (d, 1_000_000u64)
    } else {
        (lower, 1u64)
    };
    let digits = digits.trim();
    let (whole, frac) = digits.split_once('.').unwrap_or((digits, ""));
    if whole.is_empty() || !whole.bytes().all(|b| b.is_ascii_digit()) || !frac.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    let mut value = whole.parse::<u64>().ok()?.checked_mul(scale)?;
    let mut place = scale;
    for digit in frac.bytes() {
        place /= 10;
        let d = u64::from(digit - b'0');
        if place == 0 {
            if d != 0 {
                return None;
            }
            continue;
        }
        value = value.checked_add(d * place)?;
    }
    Some(value)
}

fn position_value(value: &Value, field: &str) -> Result<u64, DecodeError> {
    match value {
        Value::Number(n) => n
            .as_u64()
            .or_else(|| n.as_f64().filter(|f| *f >= 0.0 && *f == (*f as u64) as f64).map(|f| f as u64))
            .ok_or_else(|| violation(field, "positions must be non-negative integers")),
        Value::String(s) => parse_position(s).ok_or_else(|| violation(field, alloc::format!("unreadable position `{s}`"))),
        _ => Err(violation(field, "positions must be numbers")),
    }
}

fn positions(value: Option<&Value>, field: &str) -> Result<Option<Vec<u64>>, DecodeError> {
    let Some(value) = value else { return Ok(None) };
    if is_unknown(value) {
        return Ok(None);
    }
    let list = match value {
        Value::Array(items) => {
            if items.is_empty() || items.len() > 2 {
                return Err(violation(field, "expected one or two positions"));
            }
            if items.iter().all(is_unknown) {
                return Ok(None);
            }
            items.iter().map(|item| position_value(item, field)).collect::<Result<Vec<_>, _>>()?
        }
        scalar => alloc::vec![position_value(scalar, field)?],
    };
    Ok(Some(list))
}

fn decode_variants(obj: &Map<String, Value>) -> Result<VariantsResult, DecodeError> {
    only_keys(obj, &["success", "assembly_id", "chromosome", "start", "end"])?;
    let success = obj
        .get("success")
        .ok_or_else(|| violation("success", "missing"))?
        .as_bool()
        .ok_or_else(|| violation("success", "expected a boolean"))?;
    let assembly_id = match obj.get("assembly_id") {
        None => None,
        Some(v) if is_unknown(v) => None,
        Some(Value::String(s)) => Some(s.trim().to_string()),
        Some(_) => return Err(violation("assembly_id", "expected a string")),
    };
    let chromosome = match obj.get("chromosome") {
        None => None,
        Some(v) if is_unknown(v) => None,
        Some(Value::String(s)) => Some(
            Chromosome::parse(s).ok_or_else(|| DecodeError::EnumViolation { field: "chromosome".into(), value: s.clone() })?,
        ),
        Some(Value::Number(n)) => {
            let label = alloc::format!("{n}");
            Some(Chromosome::parse(&label).ok_or(DecodeError::EnumViolation { field: "chromosome".into(), value: label })?)
        }
        Some(_) => return Err(violation("chromosome", "expected a string")),
    };
    Ok(VariantsResult {
        success,
        assembly_id,
        chromosome,
        start: positions(obj.get("start"), "start")?,
        end: positions(obj.get("end"), "end")?,
    })
}

fn decode_filters(obj: &Map<String, Value>) -> Result<Vec<FilterProposal>, DecodeError> {
    only_keys(obj, &["filters"])?;
    let items = match obj.get("filters") {
        Some(Value::Array(items)) => items,
        Some(_) => return Err(violation("filters", "expected an array")),
        None => return Err(violation("filters", "missing")),
    };
    items
        .iter()
        .enumerate()
        .map(|(i, item)| {
            let field = alloc::format!("filters[{i}]");
            let entry = item.as_object().ok_or_else(|| violation(&field, "expected an object"))?;
            if let Some(extra) = entry.keys().find(|k| *k != "term" && *k != "scope") {
                return Err(violation(&alloc::format!("{field}.{extra}"), "unexpected field"));
            }
            let term = match entry.get("term") {
                Some(Value::String(s)) if !s.trim().is_empty() => s.clone(),
                _ => return Err(violation(&alloc::format!("{field}.term"), "expected a non-empty string")),
            };
            let scope_label = match entry.get("scope") {
                Some(Value::String(s)) => s.as_str(),
                _ => return Err(violation(&alloc::format!("{field}.scope"), "expected a string")),
            };
            let scope = normalized_label(scope_label)
                .parse::<Scope>()
                .ok()
                .filter(|s| FILTER_SCOPES.contains(s))
                .ok_or_else(|| DecodeError::EnumViolation {
                    field: alloc::format!("{field}.scope"),
                    value: scope_label.to_string(),
                })?;
            Ok(FilterProposal { term, scope })
        })
        .collect()
}
