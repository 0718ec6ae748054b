//! Fault-injection checks over the two extraction workflows.
//!
//! Each check returns the number of runs it compared, or a description of
//! the first disagreement.

use std::path::PathBuf;

use beaconql::dataset::load_dataset;
use beaconql::extract::extract;
use beaconql::mocks::{script_for, shipped_answers, shipped_script, ScriptedQuestion, Step};
use beaconql_core::draft::{ExtractionDraft, FieldStatus, Workflow};
use beaconql_core::llm::{FailureReason, MockProvider, MockScript};
use beaconql_core::template::TemplateRegistry;
use serde_json::{json, Value};

pub fn dataset_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/dataset")
}

fn run(workflow: Workflow, question: &str, script: MockScript) -> (ExtractionDraft, Option<beaconql::extract::StepTrace>) {
    extract(workflow, question, &MockProvider::new(script), &TemplateRegistry::builtin())
}

/// The extracted field a parallel step is responsible for.
fn field_of(draft: &ExtractionDraft, step: Step) -> Value {
    match step {
        Step::Scope => json!(draft.scope),
        Step::Granularity => json!(draft.granularity),
        Step::Variants => json!(draft.variant),
        Step::Filters => json!(draft.filters),
        other => panic!("{other:?} is not a parallel extractor"),
    }
}

fn failed_field(step: Step, reason: &str) -> Value {
    let value = match step {
        Step::Scope | Step::Granularity => json!("unknown"),
        Step::Variants => Value::Null,
        _ => json!([]),
    };
    json!({ "value": value, "status": { "status": "failed", "reason": reason } })
}

/// Every subset of failing extractors leaves the other fields as they were
/// in the fault-free run.
pub fn parallel_resilience() -> Result<usize, String> {
    let reasons = [FailureReason::Timeout, FailureReason::RateLimited, FailureReason::HttpStatus(503), FailureReason::Unreachable];
    let mut runs = 0;
    for scripted in shipped_answers().questions {
        let q = scripted.question.as_str();
        let (base, _) = run(Workflow::Parallel, q, shipped_script());
        for mask in 0u32..16 {
            let mut script = shipped_script();
            for (i, step) in Step::EXTRACTORS.iter().enumerate() {
                if mask & (1 << i) != 0 {
                    script = script.with_override(step.failing(reasons[i].clone()));
                }
            }
            let (draft, _) = run(Workflow::Parallel, q, script);
            runs += 1;
            if draft.validity != base.validity {
                return Err(format!("{q:?} mask {mask:04b}: validity changed"));
            }
            if draft.exchanges.len() != 5 {
                return Err(format!("{q:?} mask {mask:04b}: {} exchanges", draft.exchanges.len()));
            }
            for (i, step) in Step::EXTRACTORS.iter().enumerate() {
                let expected = if mask & (1 << i) != 0 { failed_field(*step, &reasons[i].code()) } else { field_of(&base, *step) };
                let got = field_of(&draft, *step);
                if got != expected {
                    return Err(format!("{q:?} mask {mask:04b} {step:?}: {got} != {expected}"));
                }
            }
        }
    }
    Ok(runs)
}

/// A transport failure at any multistep step issues no later completion and
/// spends strictly fewer tokens than the full chain.
pub fn multistep_termination() -> Result<usize, String> {
    let names = ["scope", "granularity", "text2sql"];
    let mut runs = 0;
    for scripted in shipped_answers().questions {
        let q = scripted.question.as_str();
        let (base, base_trace) = run(Workflow::Multistep, q, shipped_script());
        if base.exchanges.len() != 3 {
            continue;
        }
        let base_trace = base_trace.unwrap();
        if base_trace.terminated_at.is_some() {
            return Err(format!("{q:?}: fault-free run terminated at {:?}", base_trace.terminated_at));
        }
        for (k, step) in Step::MULTISTEP.iter().enumerate() {
            let (draft, trace) = run(Workflow::Multistep, q, shipped_script().with_override(step.failing(FailureReason::Timeout)));
            let trace = trace.unwrap();
            runs += 1;
            if trace.terminated_at.as_deref() != Some(names[k]) {
                return Err(format!("{q:?} fault at {step:?}: terminated at {:?}", trace.terminated_at));
            }
            if draft.exchanges.len() != k + 1 {
                return Err(format!("{q:?} fault at {step:?}: {} exchanges", draft.exchanges.len()));
            }
            for later in &Step::MULTISTEP[k + 1..] {
                if draft.exchanges.iter().any(|e| e.prompt.text.contains(later.anchor())) {
                    return Err(format!("{q:?} fault at {step:?}: {later:?} still ran"));
                }
            }
            if draft.total_usage.total() >= base.total_usage.total() {
                return Err(format!(
                    "{q:?} fault at {step:?}: usage {} not below {}",
                    draft.total_usage.total(),
                    base.total_usage.total()
                ));
            }
            let early = FieldStatus::early_termination();
            if k == 0 && draft.granularity.status != early {
                return Err(format!("{q:?}: granularity not marked early-termination"));
            }
            if draft.variant.status != early || draft.filters.status != early {
                return Err(format!("{q:?} fault at {step:?}: SQL fields not marked early-termination"));
            }
        }
    }
    Ok(runs)
}

/// The parallel workflow spends at least as many tokens as the multistep
/// one on every dataset question, under mocks aligned with the gold labels.
pub fn usage_ordering() -> Result<usize, String> {
    let dataset = load_dataset(&dataset_dir()).map_err(|e| e.to_string())?;
    let aligned: Vec<ScriptedQuestion> = dataset.cases.iter().map(ScriptedQuestion::aligned).collect();
    let script = script_for(&aligned, &[]);
    for case in &dataset.cases {
        let (parallel, _) = run(Workflow::Parallel, &case.question, script.clone());
        let (multistep, _) = run(Workflow::Multistep, &case.question, script.clone());
        let (p, m) = (parallel.total_usage.total(), multistep.total_usage.total());
        if p < m {
            return Err(format!("{}: parallel {p} < multistep {m}", case.id));
        }
    }
    Ok(dataset.cases.len())
}
