//! Wire format of Beacon v2 requests and responses.
//!
//! Requests look like
//! `{"query": {"filters": [...], "requestedGranularity": ..., "requestParameters": {...}}}`;
//! the scope travels in the endpoint path, not in the body. Positions are
//! serialized as arrays of decimal strings.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde_json::{json, Map, Value};

use crate::model::{
    BeaconQuery, BeaconResponse, Chromosome, Filter, Granularity, PayloadError, Scope, VariantParams,
};

pub fn build_payload(query: &BeaconQuery) -> Result<Value, PayloadError> {
    if !query.scope.is_concrete() {
        return Err(PayloadError::MissingScope);
    }
    if !query.granularity.is_concrete() {
        return Err(PayloadError::MissingGranularity);
    }
    let filters = query
        .filters
        .iter()
        .map(filter_json)
        .collect::<Result<Vec<_>, _>>()?;

    let mut body = Map::new();
    body.insert("filters".into(), Value::Array(filters));
    body.insert("requestedGranularity".into(), Value::String(query.granularity.as_str().into()));
    if let Some(variant) = &query.variant {
        body.insert("requestParameters".into(), Value::Object(request_parameters(variant)?));
    }
    Ok(json!({ "query": Value::Object(body) }))
}

fn filter_json(filter: &Filter) -> Result<Value, PayloadError> {
    filter.validate()?;
    let wire = filter.wire_normalized();
    let mut obj = Map::new();
    obj.insert("scope".into(), Value::String(wire.scope.as_str().into()));
    if let Some(id) = wire.id {
        obj.insert("id".into(), Value::String(id));
    }
    if let Some(value) = wire.value {
        obj.insert("value".into(), Value::String(value));
    }
    Ok(Value::Object(obj))
}

fn positions(values: &[u64]) -> Value {
    Value::Array(values.iter().map(|v| Value::String(v.to_string())).collect())
}

fn request_parameters(variant: &VariantParams) -> Result<Map<String, Value>, PayloadError> {
    variant.validate()?;
    let mut params = Map::new();
    params.insert("assemblyId".into(), Value::String(variant.assembly_id.clone()));
    if variant.is_positional() {
        params.insert("start".into(), positions(&variant.start));
        if !variant.end.is_empty() {
            params.insert("end".into(), positions(&variant.end));
        }
    }
    if let Some(chrom) = &variant.reference_name {
        params.insert("referenceName".into(), Value::String(chrom.as_str().into()));
    }
    let emit_bases = variant.is_positional();
    for (key, bases) in [
        ("referenceBases", &variant.reference_bases),
        ("alternateBases", &variant.alternate_bases),
    ] {
        if emit_bases || bases != "N" {
            params.insert(key.into(), Value::String(bases.clone()));
        }
    }
    if let Some(gene) = &variant.gene_id {
        params.insert("geneId".into(), Value::String(gene.clone()));
    }
    Ok(params)
}

fn malformed(msg: impl Into<String>) -> PayloadError {
    PayloadError::Malformed(msg.into())
}

fn as_object<'a>(value: &'a Value, what: &str) -> Result<&'a Map<String, Value>, PayloadError> {
    value.as_object().ok_or_else(|| malformed(format!("{what} must be an object")))
}

fn reject_extra_keys(obj: &Map<String, Value>, allowed: &[&str], what: &str) -> Result<(), PayloadError> {
    match obj.keys().find(|k| !allowed.contains(&k.as_str())) {
        Some(key) => Err(malformed(format!("unexpected key `{key}` in {what}"))),
        None => Ok(()),
    }
}

fn string_field(obj: &Map<String, Value>, key: &str) -> Result<Option<String>, PayloadError> {
    match obj.get(key) {
        None | Some(Value::Null) => Ok(None),
        Some(Value::String(s)) => Ok(Some(s.clone())),
        Some(_) => Err(malformed(format!("`{key}` must be a string"))),
    }
}

fn parse_positions(value: &Value, key: &str) -> Result<Vec<u64>, PayloadError> {
    let items = value
        .as_array()
        .ok_or_else(|| malformed(format!("`{key}` must be an array")))?;
    items
        .iter()
        .map(|item| match item {
            Value::String(s) => s.parse::<u64>().ok(),
            Value::Number(n) => n.as_u64(),
            _ => None,
        })
        .collect::<Option<Vec<_>>>()
        .ok_or_else(|| malformed(format!("`{key}` must hold non-negative integers")))
}

/// Inverse of [`build_payload`]; the scope comes from the request path.
pub fn parse_payload(scope: Scope, doc: &Value) -> Result<BeaconQuery, PayloadError> {
    if !scope.is_concrete() {
        return Err(PayloadError::MissingScope);
    }
    let root = as_object(doc, "payload")?;
    reject_extra_keys(root, &["query", "meta"], "payload")?;
    let query = as_object(root.get("query").ok_or_else(|| malformed("missing `query`"))?, "query")?;
    reject_extra_keys(query, &["filters", "requestedGranularity", "requestParameters"], "query")?;

    let granularity = match query.get("requestedGranularity") {
        Some(Value::String(s)) => s.parse::<Granularity>().map_err(|e| malformed(e.to_string()))?,
        Some(_) => return Err(malformed("`requestedGranularity` must be a string")),
        None => return Err(PayloadError::MissingGranularity),
    };
    if !granularity.is_concrete() {
        return Err(PayloadError::MissingGranularity);
    }

    let filters = match query.get("filters") {
        None => Vec::new(),
        Some(Value::Array(items)) => items
            .iter()
            .map(|item| parse_filter(item, scope))
            .collect::<Result<Vec<_>, _>>()?,
        Some(_) => return Err(malformed("`filters` must be an array")),
    };

    let variant = match query.get("requestParameters") {
        None => None,
        Some(params) => Some(parse_request_parameters(params)?),
    };

    Ok(BeaconQuery { scope, granularity, variant, filters })
}

fn parse_filter(item: &Value, default_scope: Scope) -> Result<Filter, PayloadError> {
    let obj = as_object(item, "filter")?;
    reject_extra_keys(obj, &["scope", "id", "value"], "filter")?;
    let scope = match string_field(obj, "scope")? {
        Some(s) => s.parse::<Scope>().map_err(|e| malformed(e.to_string()))?,
        None => default_scope,
    };
    let filter = Filter::new(string_field(obj, "id")?, string_field(obj, "value")?, None, scope);
    filter.validate()?;
    Ok(filter)
}

fn parse_request_parameters(params: &Value) -> Result<VariantParams, PayloadError> {
    let obj = as_object(params, "requestParameters")?;
    reject_extra_keys(
        obj,
        &["assemblyId", "start", "end", "referenceName", "referenceBases", "alternateBases", "geneId"],
        "requestParameters",
    )?;
    let mut variant = VariantParams::default();
    if let Some(assembly) = string_field(obj, "assemblyId")? {
        variant.assembly_id = assembly;
    }
    if let Some(start) = obj.get("start") {
        variant.start = parse_positions(start, "start")?;
    }
    if let Some(end) = obj.get("end") {
        variant.end = parse_positions(end, "end")?;
    }
    if let Some(chrom) = string_field(obj, "referenceName")? {
        variant.reference_name = Some(
            Chromosome::parse(&chrom).ok_or_else(|| malformed(format!("invalid referenceName `{chrom}`")))?,
        );
    }
    if let Some(bases) = string_field(obj, "referenceBases")? {
        variant.reference_bases = bases;
    }
    if let Some(bases) = string_field(obj, "alternateBases")? {
        variant.alternate_bases = bases;
    }
    variant.gene_id = string_field(obj, "geneId")?;
    variant.validate()?;
    Ok(variant)
}

/// Reads an answer at the requested granularity.
///
/// Accepts the flat shape (`{"exists": ..}`, `{"count": ..}`,
/// `{"records": [..]}`) as well as the Beacon v2 envelope
/// (`responseSummary` plus `response.resultSets[].results`).
pub fn parse_response(granularity: Granularity, body: &Value) -> Result<BeaconResponse, PayloadError> {
    let summary = body.get("responseSummary");
    let lookup = |key: &str| body.get(key).or_else(|| summary.and_then(|s| s.get(key)));
    match granularity {
        Granularity::Boolean => lookup("exists")
            .and_then(Value::as_bool)
            .map(BeaconResponse::boolean)
            .ok_or_else(|| PayloadError::ShapeMismatch("boolean answer needs `exists`".into())),
        Granularity::Count => body
            .get("count")
            .or_else(|| summary.and_then(|s| s.get("numTotalResults")))
            .and_then(Value::as_u64)
            .map(BeaconResponse::count)
            .ok_or_else(|| PayloadError::ShapeMismatch("count answer needs a non-negative `count`".into())),
        Granularity::Record => {
            if let Some(records) = body.get("records") {
                let items = records
                    .as_array()
                    .filter(|items| items.iter().all(Value::is_object))
                    .ok_or_else(|| PayloadError::ShapeMismatch("`records` must be an array of objects".into()))?;
                return Ok(BeaconResponse::records(items.clone()));
            }
            let sets = body
                .pointer("/response/resultSets")
                .and_then(Value::as_array)
                .ok_or_else(|| PayloadError::ShapeMismatch("record answer needs `records`".into()))?;
            let mut records = Vec::new();
            for set in sets {
                if let Some(results) = set.get("results").and_then(Value::as_array) {
                    records.extend(results.iter().filter(|r| r.is_object()).cloned());
                }
            }
            Ok(BeaconResponse::records(records))
        }
        Granularity::Unknown => Err(PayloadError::MissingGranularity),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_granularity_never_serializes() {
        let query = BeaconQuery::new(Scope::Individuals, Granularity::Unknown);
        assert_eq!(build_payload(&query), Err(PayloadError::MissingGranularity));
        let query = BeaconQuery::new(Scope::Unknown, Granularity::Count);
        assert_eq!(build_payload(&query), Err(PayloadError::MissingScope));
    }

    #[test]
    fn term_only_filter_travels_as_id() {
        let mut query = BeaconQuery::new(Scope::Individuals, Granularity::Count);
        query.filters.push(Filter::term("hereditary cancers", Scope::Individuals));
        let doc = build_payload(&query).unwrap();
        assert_eq!(doc["query"]["filters"][0]["id"], "hereditary cancers");
        assert!(doc["query"].get("requestParameters").is_none());
    }

    #[test]
    fn response_shapes() {
        assert_eq!(
            parse_response(Granularity::Boolean, &json!({"exists": true})).unwrap().exists,
            Some(true)
        );
        assert_eq!(parse_response(Granularity::Count, &json!({"count": 24})).unwrap().count, Some(24));
        assert!(matches!(
            parse_response(Granularity::Record, &json!({"count": 24})),
            Err(PayloadError::ShapeMismatch(_))
        ));
        assert!(matches!(
            parse_response(Granularity::Count, &json!({"count": -1})),
            Err(PayloadError::ShapeMismatch(_))
        ));
        let envelope = json!({
            "responseSummary": {"exists": true, "numTotalResults": 1},
            "response": {"resultSets": [{"results": [{"id": "a"}]}]}
        });
        assert_eq!(parse_response(Granularity::Count, &envelope).unwrap().count, Some(1));
        assert_eq!(parse_response(Granularity::Record, &envelope).unwrap().records.unwrap().len(), 1);
    }

    #[test]
    fn parse_rejects_unexpected_keys() {
        let doc = json!({"query": {"requestedGranularity": "count", "bogus": 1}});
        assert!(matches!(parse_payload(Scope::Individuals, &doc), Err(PayloadError::Malformed(_))));
    }
}
