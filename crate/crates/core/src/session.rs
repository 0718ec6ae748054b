//! Per-tab conversation state and the confirmation checkpoint.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::draft::{ExtractionDraft, FieldStatus, Validity, Workflow};
use crate::frame::{QueryResult, ResultFrame};
use crate::guard::{GuardReport, ScriptArtifact};
use crate::model::{BeaconQuery, Filter, Granularity, Scope, VariantParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TabState {
    AwaitingQuestion,
    AwaitingConfirmation,
    Executing,
    AwaitingCodeReview,
    Done,
}

/// Fields carried between turns. Only confirmed values enter it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistorySummary {
    pub scope: Scope,
    pub granularity: Granularity,
    pub variant: Option<VariantParams>,
    pub filters: Vec<Filter>,
}

impl Default for HistorySummary {
    fn default() -> Self {
        HistorySummary { scope: Scope::Unknown, granularity: Granularity::Unknown, variant: None, filters: Vec::new() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldSource {
    Extracted,
    History,
    Missing,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CardField<T> {
    pub value: T,
    pub status: FieldStatus,
    pub source: FieldSource,
}

/// Everything inferred for one question, shown before any data access.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfirmationCard {
    pub question: String,
    pub workflow: Workflow,
    pub scope: CardField<Scope>,
    pub granularity: CardField<Granularity>,
    pub variant: CardField<Option<VariantParams>>,
    pub filters: CardField<Vec<Filter>>,
    pub residue: Vec<String>,
    /// Fields the user still has to supply or check.
    pub missing: Vec<String>,
    pub editable: bool,
}

fn merge<T: Clone>(
    extracted: T,
    status: &FieldStatus,
    present: impl Fn(&T) -> bool,
    history: T,
) -> CardField<T> {
    if status.is_known() && present(&extracted) {
        CardField { value: extracted, status: FieldStatus::Known, source: FieldSource::Extracted }
    } else if present(&history) {
        CardField { value: history, status: FieldStatus::Known, source: FieldSource::History }
    } else {
        CardField { value: extracted, status: status.clone(), source: FieldSource::Missing }
    }
}

impl ConfirmationCard {
    /// Known, non-empty extracted fields win; everything else falls back to
    /// the confirmed history.
    pub fn merge(draft: &ExtractionDraft, history: &HistorySummary) -> ConfirmationCard {
        let scope = merge(draft.scope.value, &draft.scope.status, |s| s.is_concrete(), history.scope);
        let granularity =
            merge(draft.granularity.value, &draft.granularity.status, |g| g.is_concrete(), history.granularity);
        let variant = merge(draft.variant.value.clone(), &draft.variant.status, Option::is_some, history.variant.clone());
        let filters = merge(draft.filters.value.clone(), &draft.filters.status, |f| !f.is_empty(), history.filters.clone());

        let mut missing = Vec::new();
        if scope.source == FieldSource::Missing {
            missing.push("scope".to_string());
        }
        if granularity.source == FieldSource::Missing {
            missing.push("granularity".to_string());
        }
        if variant.source == FieldSource::Missing && !variant.status.is_known() {
            missing.push("variant".to_string());
        }
        if filters.source == FieldSource::Missing && !filters.status.is_known() {
            missing.push("filters".to_string());
        }
        ConfirmationCard {
            question: draft.question.clone(),
            workflow: draft.workflow,
            scope,
            granularity,
            variant,
            filters,
            residue: draft.residue.clone(),
            missing,
            editable: true,
        }
    }
}

/// An edit to one card field: absent keeps the card value, `null` clears it.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub enum Patch<T> {
    #[default]
    Keep,
    Clear,
    Set(T),
}

impl<T> Patch<T> {
    pub fn apply(self, current: Option<T>) -> Option<T> {
        match self {
            Patch::Keep => current,
            Patch::Clear => None,
            Patch::Set(v) => Some(v),
        }
    }
}

impl<'de, T: Deserialize<'de>> Deserialize<'de> for Patch<T> {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        Ok(match Option::<T>::deserialize(deserializer)? {
            Some(v) => Patch::Set(v),
            None => Patch::Clear,
        })
    }
}

impl<T: Serialize> Serialize for Patch<T> {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            Patch::Set(v) => serializer.serialize_some(v),
            _ => serializer.serialize_none(),
        }
    }
}

fn is_keep<T>(p: &Patch<T>) -> bool {
    matches!(p, Patch::Keep)
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CardEdits {
    #[serde(default, skip_serializing_if = "is_keep")]
    pub scope: Patch<Scope>,
    #[serde(default, skip_serializing_if = "is_keep")]
    pub granularity: Patch<Granularity>,
    #[serde(default, skip_serializing_if = "is_keep")]
    pub variant: Patch<VariantParams>,
    #[serde(default, skip_serializing_if = "is_keep")]
    pub filters: Patch<Vec<Filter>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, thiserror::Error)]
#[error("field `{field}` is invalid: {message}")]
pub struct ValidationError {
    pub field: String,
    pub message: String,
}

impl ConfirmationCard {
    /// Applies edits and validates the result as a Beacon query.
    pub fn to_query(&self, edits: CardEdits) -> Result<BeaconQuery, ValidationError> {
        let invalid = |field: &str, message: String| ValidationError { field: field.into(), message };
        let scope = edits.scope.apply(Some(self.scope.value)).filter(|s| s.is_concrete());
        let scope = scope.ok_or_else(|| invalid("scope", "a concrete scope is required".into()))?;
        let granularity = edits.granularity.apply(Some(self.granularity.value)).filter(|g| g.is_concrete());
        let granularity = granularity.ok_or_else(|| invalid("granularity", "record, count or boolean is required".into()))?;
        let variant = edits.variant.apply(self.variant.value.clone());
        if let Some(v) = &variant {
            v.validate().map_err(|e| invalid("variant", e.to_string()))?;
        }
        let filters = edits.filters.apply(Some(self.filters.value.clone())).unwrap_or_default();
        for (i, f) in filters.iter().enumerate() {
            f.validate().map_err(|e| invalid(&format!("filters[{i}]"), e.to_string()))?;
        }
        Ok(BeaconQuery { scope, granularity, variant, filters })
    }
}

/// Output of one analysis run as kept by the tab.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutionRecord {
    pub stdout: String,
    pub stderr: String,
    pub exit_status: Option<i32>,
    pub timed_out: bool,
    pub files: Vec<String>,
    pub undeclared_files: Vec<String>,
    pub wall_time_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodeReview {
    pub artifact: ScriptArtifact,
    pub guard: GuardReport,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, thiserror::Error)]
#[serde(tag = "code", rename_all = "snake_case")]
pub enum SessionError {
    #[error("tab is {actual:?}; this operation needs {expected}")]
    WrongState { expected: String, actual: TabState },
    #[error("the last result has no records to analyse")]
    NoRecords,
    #[error(transparent)]
    Validation(ValidationError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
#[allow(clippy::large_enum_variant)]
pub enum QuestionOutcome {
    Card { card: ConfirmationCard },
    Refusal { reason: String },
    Greeting { reply: String },
}

pub const GREETING_REPLY: &str = "Hello, I am the Beacon query assistant. What would you like to look for?";

const GREETINGS: &[&str] = &[
    "hello", "hi", "hey", "hiya", "howdy", "greetings", "good", "morning", "afternoon", "evening", "day", "there",
    "yo", "thanks", "thank", "you", "beacon", "assistant", "how", "are",
];

/// True for messages made only of greeting words.
pub fn is_greeting(message: &str) -> bool {
    let words = crate::eval::tokenize(message);
    !words.is_empty()
        && words.iter().all(|w| GREETINGS.contains(&w.as_str()))
        && words.iter().any(|w| matches!(w.as_str(), "hello" | "hi" | "hey" | "hiya" | "howdy" | "greetings" | "morning" | "yo"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tab {
    pub id: String,
    pub state: TabState,
    pub history: HistorySummary,
    pub pending_card: Option<ConfirmationCard>,
    /// Query accepted at the checkpoint and not yet answered.
    pub confirmed: Option<BeaconQuery>,
    pub last_result: Option<QueryResult>,
    pub review: Option<CodeReview>,
    pub artifacts: Vec<ExecutionRecord>,
}

impl Tab {
    pub fn new(id: impl Into<String>) -> Self {
        Tab {
            id: id.into(),
            state: TabState::AwaitingQuestion,
            history: HistorySummary::default(),
            pending_card: None,
            confirmed: None,
            last_result: None,
            review: None,
            artifacts: Vec::new(),
        }
    }

    fn expect(&self, allowed: &[TabState], expected: &str) -> Result<(), SessionError> {
        if allowed.contains(&self.state) {
            Ok(())
        } else {
            Err(SessionError::WrongState { expected: expected.into(), actual: self.state })
        }
    }

    pub fn can_ask(&self) -> Result<(), SessionError> {
        self.expect(&[TabState::AwaitingQuestion, TabState::Done], "awaiting_question or done")
    }

    /// Greeting check that runs before any extraction.
    pub fn greet(&self, message: &str) -> Result<Option<QuestionOutcome>, SessionError> {
        self.can_ask()?;
        Ok(is_greeting(message).then(|| QuestionOutcome::Greeting { reply: GREETING_REPLY.into() }))
    }

    pub fn post_question(&mut self, draft: &ExtractionDraft) -> Result<QuestionOutcome, SessionError> {
        self.can_ask()?;
        if !draft.validity.yes {
            self.state = TabState::AwaitingQuestion;
            let reason = if draft.validity.reason.is_empty() { Validity::rejected("").reason } else { draft.validity.reason.clone() };
            return Ok(QuestionOutcome::Refusal { reason });
        }
        let card = ConfirmationCard::merge(draft, &self.history);
        self.pending_card = Some(card.clone());
        self.state = TabState::AwaitingConfirmation;
        Ok(QuestionOutcome::Card { card })
    }

    /// The checkpoint: the only way into `Executing`.
    pub fn confirm(&mut self, edits: CardEdits) -> Result<BeaconQuery, SessionError> {
        self.expect(&[TabState::AwaitingConfirmation], "awaiting_confirmation")?;
        let card = self.pending_card.as_ref().expect("awaiting confirmation implies a card");
        let query = card.to_query(edits).map_err(SessionError::Validation)?;
        self.confirmed = Some(query.clone());
        self.state = TabState::Executing;
        Ok(query)
    }

    /// Records the answer to the confirmed query. Failures return the tab
    /// to the checkpoint and leave the history alone.
    pub fn finish_execution(&mut self, outcome: Result<QueryResult, String>) -> Result<(), SessionError> {
        self.expect(&[TabState::Executing], "executing")?;
        let query = self.confirmed.take().expect("executing implies a confirmed query");
        match outcome {
            Ok(result) => {
                self.history = HistorySummary {
                    scope: query.scope,
                    granularity: query.granularity,
                    variant: query.variant,
                    filters: query.filters,
                };
                self.last_result = Some(result);
                self.pending_card = None;
                self.state = TabState::Done;
            }
            Err(_) => self.state = TabState::AwaitingConfirmation,
        }
        Ok(())
    }

    pub fn records(&self) -> Result<&ResultFrame, SessionError> {
        self.expect(&[TabState::Done, TabState::AwaitingCodeReview], "done")?;
        match &self.last_result {
            Some(QueryResult::Record(frame)) => Ok(frame),
            _ => Err(SessionError::NoRecords),
        }
    }

    pub fn submit_for_review(&mut self, review: CodeReview) -> Result<(), SessionError> {
        self.records()?;
        self.review = Some(review);
        self.state = TabState::AwaitingCodeReview;
        Ok(())
    }

    pub fn can_run(&self) -> Result<&CodeReview, SessionError> {
        self.expect(&[TabState::AwaitingCodeReview], "awaiting_code_review")?;
        Ok(self.review.as_ref().expect("review state implies a review"))
    }

    pub fn finish_run(&mut self, record: ExecutionRecord) -> Result<(), SessionError> {
        self.can_run()?;
        self.artifacts.push(record);
        self.state = TabState::Done;
        Ok(())
    }
}
