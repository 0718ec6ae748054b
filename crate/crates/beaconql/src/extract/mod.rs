//! Question-to-draft workflows.

pub mod multistep;
pub mod parallel;

use beaconql_core::draft::{ExtractionDraft, Workflow};
use beaconql_core::llm::ChatProvider;
use beaconql_core::template::TemplateRegistry;

pub use multistep::{extract_multistep, StepTrace};
pub use parallel::{extract_parallel, validate_question};

/// Runs `workflow`; only the multistep chain produces a trace.
pub fn extract(
    workflow: Workflow,
    question: &str,
    provider: &dyn ChatProvider,
    registry: &TemplateRegistry,
) -> (ExtractionDraft, Option<StepTrace>) {
    match workflow {
        Workflow::Parallel => (extract_parallel(question, provider, registry), None),
        Workflow::Multistep => {
            let (draft, trace) = extract_multistep(question, provider, registry);
            (draft, Some(trace))
        }
    }
}
