use std::collections::BTreeMap;
use std::time::Duration;

use beaconql_core::decode::{decode_text, OutputSchema};
use beaconql_core::llm::{complete, DecodeStatus, FailureReason, MockProvider, MockReply, MockRule, MockScript, ResponseFormat};
use beaconql_core::template::{RenderedPrompt, TemplateRegistry};
use proptest::prelude::*;
use serde_json::{json, Map, Value};

const KEYS: [&str; 16] = [
    "scope", "granularity", "success", "assembly_id", "chromosome", "start", "end", "filters", "term", "yes", "reason",
    "code", "files", "assumptions", "feedback", "extra",
];

fn field_value() -> impl Strategy<Value = Value> {
    let leaf = prop_oneof![
        proptest::sample::select(vec![
            "unknown", "individuals", "g_variants", "biosamples", "runs", "record", "count", "boolean", "7", "chrX",
            "23", "500k", "1.5M", "hg38", "GRCh38", "asthma", "", "x = 1\n", "/tmp/a.png",
        ])
        .prop_map(|s| json!(s)),
        any::<bool>().prop_map(Value::Bool),
        (0u64..2_000_000).prop_map(Value::from),
        Just(Value::Null),
    ];
    leaf.prop_recursive(2, 12, 3, |inner| {
        prop_oneof![
            proptest::collection::vec(inner.clone(), 0..3).prop_map(Value::Array),
            proptest::collection::btree_map(proptest::sample::select(KEYS.to_vec()), inner, 0..3)
                .prop_map(|m| Value::Object(m.into_iter().map(|(k, v)| (k.to_string(), v)).collect::<Map<_, _>>())),
        ]
    })
}

/// Model output: mostly JSON objects over the skeleton vocabulary, some junk.
fn model_text() -> impl Strategy<Value = String> {
    prop_oneof![
        4 => proptest::collection::btree_map(proptest::sample::select(KEYS.to_vec()), field_value(), 0..6)
            .prop_map(|m| Value::Object(m.into_iter().map(|(k, v)| (k.to_string(), v)).collect::<Map<_, _>>()).to_string()),
        1 => ".{0,30}",
    ]
}

fn schema() -> impl Strategy<Value = OutputSchema> {
    proptest::sample::select(OutputSchema::ALL.to_vec())
}

fn skeleton_keys(schema: OutputSchema) -> &'static [&'static str] {
    match schema {
        OutputSchema::Scope => &["scope"],
        OutputSchema::Granularity => &["granularity"],
        OutputSchema::Variants => &["success", "assembly_id", "chromosome", "start", "end"],
        OutputSchema::Filters => &["filters"],
        OutputSchema::Validity => &["yes", "reason"],
        OutputSchema::Codegen => &["code", "files", "assumptions", "feedback"],
    }
}

fn filter_item() -> impl Strategy<Value = Value> {
    (field_value(), field_value()).prop_map(|(term, scope)| json!({ "term": term, "scope": scope }))
}

/// Objects carrying exactly the schema's keys, with arbitrary values.
fn shaped_text(schema: OutputSchema) -> impl Strategy<Value = String> {
    let keys = skeleton_keys(schema);
    let value = prop_oneof![
        3 => field_value(),
        1 => proptest::collection::vec(filter_item(), 0..3).prop_map(Value::Array),
    ];
    proptest::collection::vec(value, keys.len()).prop_map(move |values| {
        Value::Object(keys.iter().map(|k| k.to_string()).zip(values).collect::<Map<_, _>>()).to_string()
    })
}

fn binding() -> impl Strategy<Value = String> {
    "[a-zA-Z0-9 .,?\n\t]{0,40}"
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn decode_is_round_trip_stable(text in model_text(), schema in schema()) {
        if let Ok(first) = decode_text(&text, schema) {
            let again = decode_text(&first.to_json().to_string(), schema);
            prop_assert_eq!(again, Ok(first));
        }
    }

    #[test]
    fn shaped_decode_is_round_trip_stable((schema, text) in schema().prop_flat_map(|s| (Just(s), shaped_text(s)))) {
        if let Ok(first) = decode_text(&text, schema) {
            let again = decode_text(&first.to_json().to_string(), schema);
            prop_assert_eq!(again, Ok(first));
        }
    }

    #[test]
    fn rendering_is_pure_and_brace_free(value in binding()) {
        let registry = TemplateRegistry::builtin();
        for id in registry.ids().map(str::to_string).collect::<Vec<_>>() {
            let template = registry.get(&id).unwrap();
            let bindings: BTreeMap<String, String> =
                template.required_bindings().iter().map(|n| (n.clone(), value.clone())).collect();
            let a = template.render(&bindings).unwrap();
            let b = registry.render(&id, &bindings).unwrap();
            prop_assert_eq!(&a, &b);
            prop_assert_eq!(a.text.matches('{').count(), template.body().matches("{{").count());
            prop_assert_eq!(a.text.matches('}').count(), template.body().matches("}}").count());
        }
    }

    #[test]
    fn mock_is_referentially_transparent(prompt in ".{0,60}", reply in ".{0,30}", needle in "[a-z]{1,3}") {
        let script = MockScript::new(MockReply::Text("default".into())).with_rule(MockRule::text(&[needle.as_str()], reply));
        let provider = MockProvider::new(script);
        let prompt = RenderedPrompt::raw(prompt);
        let mut a = complete(&provider, &prompt, ResponseFormat::Json);
        let b = complete(&provider, &prompt, ResponseFormat::Json);
        a.latency = b.latency;
        prop_assert_eq!(a, b);
    }
}

#[test]
fn transport_failures_are_data() {
    let reasons = [
        FailureReason::Timeout,
        FailureReason::AuthFailure,
        FailureReason::RateLimited,
        FailureReason::Unreachable,
        FailureReason::HttpStatus(503),
        FailureReason::BadResponse,
    ];
    for reason in reasons {
        let provider = MockProvider::new(MockScript::new(MockReply::Fail(reason.clone())));
        let exchange = complete(&provider, &RenderedPrompt::raw("q"), ResponseFormat::Text);
        assert_eq!(exchange.decode_status, DecodeStatus::TransportFailed);
        assert_eq!(exchange.failure, Some(reason));
        assert_eq!(exchange.usage.total(), 0);
        assert!(exchange.latency <= Duration::from_secs(1));
        assert!(decode_text(&exchange.raw_text, OutputSchema::Scope).is_err());
    }
}
