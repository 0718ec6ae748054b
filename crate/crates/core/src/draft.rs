//! Partially extracted queries awaiting human confirmation.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::decode::{FilterProposal, VariantsResult};
use crate::llm::{LlmExchange, Usage};
use crate::model::{Filter, Granularity, Scope, VariantParams, DEFAULT_ASSEMBLY};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Validity {
    pub yes: bool,
    pub reason: String,
}

impl Validity {
    pub const UNAVAILABLE: &'static str = "validator unavailable";

    pub fn accepted(reason: impl Into<String>) -> Self {
        Validity { yes: true, reason: reason.into() }
    }

    /// A rejection always carries a reason.
    pub fn rejected(reason: impl Into<String>) -> Self {
        let reason = reason.into();
        let reason = if reason.trim().is_empty() { "rejected".to_string() } else { reason };
        Validity { yes: false, reason }
    }

    pub fn unavailable() -> Self {
        Validity::rejected(Self::UNAVAILABLE)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", content = "reason", rename_all = "snake_case")]
pub enum FieldStatus {
    Known,
    Unknown,
    Failed(String),
}

impl FieldStatus {
    pub const EARLY_TERMINATION: &'static str = "early-termination";

    pub fn is_known(&self) -> bool {
        matches!(self, FieldStatus::Known)
    }

    pub fn early_termination() -> Self {
        FieldStatus::Failed(Self::EARLY_TERMINATION.into())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Field<T> {
    pub value: T,
    pub status: FieldStatus,
}

impl<T> Field<T> {
    pub fn known(value: T) -> Self {
        Field { value, status: FieldStatus::Known }
    }

    pub fn unknown(value: T) -> Self {
        Field { value, status: FieldStatus::Unknown }
    }

    pub fn failed(value: T, reason: impl Into<String>) -> Self {
        Field { value, status: FieldStatus::Failed(reason.into()) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Workflow {
    Parallel,
    Multistep,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractionDraft {
    pub question: String,
    pub workflow: Workflow,
    pub validity: Validity,
    pub scope: Field<Scope>,
    pub granularity: Field<Granularity>,
    pub variant: Field<Option<VariantParams>>,
    pub filters: Field<Vec<Filter>>,
    /// SQL predicates the multistep workflow could not classify.
    #[serde(default)]
    pub residue: Vec<String>,
    pub total_usage: Usage,
    pub exchanges: Vec<LlmExchange>,
}

impl ExtractionDraft {
    pub fn usage_of(exchanges: &[LlmExchange]) -> Usage {
        exchanges.iter().map(|e| e.usage).sum()
    }
}

pub fn scope_field(scope: Scope) -> Field<Scope> {
    if scope.is_concrete() { Field::known(scope) } else { Field::unknown(scope) }
}

pub fn granularity_field(granularity: Granularity) -> Field<Granularity> {
    if granularity.is_concrete() { Field::known(granularity) } else { Field::unknown(granularity) }
}

/// Canonical spelling for common assembly aliases.
pub fn normalize_assembly(raw: &str) -> String {
    match raw.trim().to_lowercase().as_str() {
        "grch38" | "hg38" | "grch38.p14" => "GRCh38".into(),
        "grch37" | "hg19" => "GRCh37".into(),
        _ => raw.trim().to_string(),
    }
}

/// Turns the variant extractor's answer into a draft field.
///
/// `success: false` means the question has no variant part: the field is
/// known and empty.
pub fn variant_field(result: &VariantsResult) -> Field<Option<VariantParams>> {
    if !result.success {
        return Field::known(None);
    }
    let nothing = result.chromosome.is_none() && result.start.is_none() && result.end.is_none();
    if nothing {
        return Field::unknown(None);
    }
    let mut params = VariantParams {
        assembly_id: result.assembly_id.as_deref().map_or_else(|| DEFAULT_ASSEMBLY.to_string(), normalize_assembly),
        reference_name: result.chromosome.clone(),
        ..VariantParams::default()
    };
    if let Some(start) = &result.start {
        params.start = start.clone();
        if let Some(end) = &result.end {
            params.end = end.clone();
        }
    }
    if params.validate().is_err() {
        return Field::failed(Some(params), "invalid_interval");
    }
    if params.reference_name.is_some() {
        Field::known(Some(params))
    } else {
        Field::unknown(Some(params))
    }
}

pub fn filters_from_proposals(proposals: &[FilterProposal]) -> Vec<Filter> {
    proposals.iter().map(|p| Filter::term(p.term.clone(), p.scope)).collect()
}
