//! Validator plus four independent extractors, fanned out on threads.

use std::thread;

use beaconql_core::decode::{decode_into, OutputSchema, Structured};
use beaconql_core::draft::{
    filters_from_proposals, granularity_field, scope_field, variant_field, ExtractionDraft, Field, Validity, Workflow,
};
use beaconql_core::llm::{complete, ChatProvider, LlmExchange, ResponseFormat};
use beaconql_core::model::{Filter, Granularity, Scope, VariantParams};
use beaconql_core::template::{ids, TemplateRegistry};

fn ask(provider: &dyn ChatProvider, registry: &TemplateRegistry, id: &str, question: &str, schema: OutputSchema) -> (LlmExchange, Option<Structured>) {
    let prompt = registry.render_with(id, &[("query", question)]).expect("builtin template renders");
    let mut exchange = complete(provider, &prompt, ResponseFormat::Json);
    let decoded = decode_into(&mut exchange, schema).ok();
    (exchange, decoded)
}

fn failure(exchange: &LlmExchange) -> String {
    exchange.failure_code().unwrap_or_else(|| "decode_failed".into())
}

/// Fail-closed question check.
pub fn validate_question(question: &str, provider: &dyn ChatProvider, registry: &TemplateRegistry) -> (Validity, LlmExchange) {
    let (exchange, decoded) = ask(provider, registry, ids::PARALLEL_VALIDATOR, question, OutputSchema::Validity);
    let validity = match decoded {
        Some(Structured::Validity(v)) if v.yes || !v.reason.trim().is_empty() => v,
        Some(Structured::Validity(_)) => Validity::rejected("question rejected"),
        _ => Validity::unavailable(),
    };
    (validity, exchange)
}

/// Runs all five completions concurrently and merges whatever succeeded.
pub fn extract_parallel(question: &str, provider: &dyn ChatProvider, registry: &TemplateRegistry) -> ExtractionDraft {
    let (validator, scope, granularity, variants, filters) = thread::scope(|s| {
        let validator = s.spawn(|| validate_question(question, provider, registry));
        let scope = s.spawn(|| ask(provider, registry, ids::PARALLEL_SCOPE, question, OutputSchema::Scope));
        let granularity = s.spawn(|| ask(provider, registry, ids::PARALLEL_GRANULARITY, question, OutputSchema::Granularity));
        let variants = s.spawn(|| ask(provider, registry, ids::PARALLEL_VARIANTS, question, OutputSchema::Variants));
        let filters = s.spawn(|| ask(provider, registry, ids::PARALLEL_FILTERS, question, OutputSchema::Filters));
        (
            validator.join().expect("validator thread"),
            scope.join().expect("scope thread"),
            granularity.join().expect("granularity thread"),
            variants.join().expect("variants thread"),
            filters.join().expect("filters thread"),
        )
    });

    let scope_f: Field<Scope> = match &scope.1 {
        Some(Structured::Scope(v)) => scope_field(*v),
        _ => Field::failed(Scope::Unknown, failure(&scope.0)),
    };
    let granularity_f: Field<Granularity> = match &granularity.1 {
        Some(Structured::Granularity(v)) => granularity_field(*v),
        _ => Field::failed(Granularity::Unknown, failure(&granularity.0)),
    };
    let variant_f: Field<Option<VariantParams>> = match &variants.1 {
        Some(Structured::Variants(v)) => variant_field(v),
        _ => Field::failed(None, failure(&variants.0)),
    };
    let filters_f: Field<Vec<Filter>> = match &filters.1 {
        Some(Structured::Filters(p)) => Field::known(filters_from_proposals(p)),
        _ => Field::failed(Vec::new(), failure(&filters.0)),
    };

    let exchanges = vec![validator.1, scope.0, granularity.0, variants.0, filters.0];
    ExtractionDraft {
        question: question.to_string(),
        workflow: Workflow::Parallel,
        validity: validator.0,
        scope: scope_f,
        granularity: granularity_f,
        variant: variant_f,
        filters: filters_f,
        residue: Vec::new(),
        total_usage: ExtractionDraft::usage_of(&exchanges),
        exchanges,
    }
}
