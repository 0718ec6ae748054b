//! Deterministic JSON rendering used for golden comparisons.
//!
//! Known payload keys keep the order in which Beacon request examples list
//! them; any other key follows, sorted by code point. Layout is two-space
//! indentation with one array element per line.

use alloc::string::String;
use alloc::vec::Vec;

use serde_json::Value;

const KEY_ORDER: &[&str] = &[
    "query",
    "filters",
    "requestedGranularity",
    "requestParameters",
    "assemblyId",
    "start",
    "end",
    "referenceName",
    "referenceBases",
    "alternateBases",
    "geneId",
    "scope",
    "id",
    "value",
];

fn key_rank(key: &str) -> usize {
    KEY_ORDER.iter().position(|k| *k == key).unwrap_or(KEY_ORDER.len())
}

pub fn canonical_json(doc: &Value) -> Vec<u8> {
    canonical_string(doc).into_bytes()
}

pub fn canonical_string(doc: &Value) -> String {
    let mut out = String::new();
    write_value(&mut out, doc, 0);
    out
}

fn indent(out: &mut String, depth: usize) {
    for _ in 0..depth {
        out.push_str("  ");
    }
}

fn write_string(out: &mut String, s: &str) {
    // serializing a plain &str cannot fail
    out.push_str(&serde_json::to_string(s).unwrap_or_default());
}

fn write_value(out: &mut String, value: &Value, depth: usize) {
    match value {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => out.push_str(&alloc::format!("{n}")),
        Value::String(s) => write_string(out, s),
        Value::Array(items) if items.is_empty() => out.push_str("[]"),
        Value::Array(items) => {
            out.push_str("[\n");
            for (i, item) in items.iter().enumerate() {
                indent(out, depth + 1);
                write_value(out, item, depth + 1);
                if i + 1 < items.len() {
                    out.push(',');
                }
                out.push('\n');
            }
            indent(out, depth);
            out.push(']');
        }
        Value::Object(map) if map.is_empty() => out.push_str("{}"),
        Value::Object(map) => {
            let mut entries: Vec<(&String, &Value)> = map.iter().collect();
            entries.sort_by(|(a, _), (b, _)| key_rank(a).cmp(&key_rank(b)).then_with(|| a.cmp(b)));
            out.push_str("{\n");
            let last = entries.len() - 1;
            for (i, (key, item)) in entries.into_iter().enumerate() {
                indent(out, depth + 1);
                write_string(out, key);
                out.push_str(": ");
                write_value(out, item, depth + 1);
                if i < last {
                    out.push(',');
                }
                out.push('\n');
            }
            indent(out, depth);
            out.push('}');
        }
    }
}
