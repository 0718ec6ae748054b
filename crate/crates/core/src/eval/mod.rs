//! Evaluation of extraction output against labelled questions.

pub mod metrics;
pub mod report;
pub mod rouge;

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize};
use serde_json::Value;

use crate::decode::parse_position;
use crate::model::{Chromosome, Granularity, Scope};

pub use metrics::{evaluate, EvalConfig, EvalError, ModelReport, TaskScores, TermRates};
pub use report::{emit_report, parse_report_json, MetricsReport, ReportFormat};
pub use rouge::{rouge1_prf, tokenize, Prf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Scope,
    Granularity,
    Variants,
    Filters,
    Invalids,
}

impl Task {
    pub const ALL: [Task; 5] = [Task::Scope, Task::Granularity, Task::Variants, Task::Filters, Task::Invalids];

    pub fn as_str(self) -> &'static str {
        match self {
            Task::Scope => "scope",
            Task::Granularity => "granularity",
            Task::Variants => "variants",
            Task::Filters => "filters",
            Task::Invalids => "invalids",
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Task {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Task::ALL
            .iter()
            .copied()
            .find(|t| t.as_str() == s.trim())
            .ok_or_else(|| alloc::format!("unknown task `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldTerm {
    pub term: String,
    pub scope: Scope,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariantGold {
    pub chrom: Option<Chromosome>,
    #[serde(default)]
    pub start: Vec<u64>,
    #[serde(default)]
    pub end: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gold {
    Scope(Scope),
    Granularity(Granularity),
    Variants(VariantGold),
    Filters(Vec<GoldTerm>),
    Invalid,
}

impl Gold {
    pub fn task(&self) -> Task {
        match self {
            Gold::Scope(_) => Task::Scope,
            Gold::Granularity(_) => Task::Granularity,
            Gold::Variants(_) => Task::Variants,
            Gold::Filters(_) => Task::Filters,
            Gold::Invalid => Task::Invalids,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalCase {
    pub id: String,
    pub question: String,
    pub gold: Gold,
}

impl EvalCase {
    pub fn task(&self) -> Task {
        self.gold.task()
    }
}

fn positions_from(value: &Value) -> Result<Vec<u64>, String> {
    let one = |v: &Value| match v {
        Value::Number(n) => n.as_u64().ok_or_else(|| "positions must be non-negative integers".to_string()),
        Value::String(s) => parse_position(s).ok_or_else(|| alloc::format!("bad position `{s}`")),
        _ => Err("positions must be numbers or strings".into()),
    };
    match value {
        Value::Array(items) => items.iter().map(one).collect(),
        Value::Null => Ok(Vec::new()),
        other => one(other).map(|p| alloc::vec![p]),
    }
}

/// Parses the gold cell of a dataset row for `task`.
///
/// Scope and granularity cells hold the bare label; variant cells a JSON
/// object with `chrom`, `start`, `end`; filter cells a JSON array of
/// `{term, scope}`; invalid rows hold `false` or nothing.
pub fn parse_gold(task: Task, cell: &str) -> Result<Gold, String> {
    let cell = cell.trim();
    match task {
        Task::Scope => {
            let scope: Scope = cell.parse().map_err(|_| alloc::format!("`{cell}` is not a scope label"))?;
            Ok(Gold::Scope(scope))
        }
        Task::Granularity => {
            let g: Granularity = cell.parse().map_err(|_| alloc::format!("`{cell}` is not a granularity label"))?;
            Ok(Gold::Granularity(g))
        }
        Task::Variants => {
            let value: Value = serde_json::from_str(cell).map_err(|e| alloc::format!("variant gold is not JSON: {e}"))?;
            let obj = value.as_object().ok_or("variant gold must be an object")?;
            if let Some(extra) = obj.keys().find(|k| !["chrom", "start", "end"].contains(&k.as_str())) {
                return Err(alloc::format!("unexpected key `{extra}` in variant gold"));
            }
            let chrom = match obj.get("chrom") {
                None | Some(Value::Null) => None,
                Some(Value::String(s)) => Some(Chromosome::parse(s).ok_or_else(|| alloc::format!("bad chromosome `{s}`"))?),
                Some(Value::Number(n)) => {
                    Some(Chromosome::parse(&n.to_string()).ok_or_else(|| alloc::format!("bad chromosome `{n}`"))?)
                }
                Some(_) => return Err("chrom must be a string".into()),
            };
            let start = positions_from(obj.get("start").unwrap_or(&Value::Null))?;
            let end = positions_from(obj.get("end").unwrap_or(&Value::Null))?;
            Ok(Gold::Variants(VariantGold { chrom, start, end }))
        }
        Task::Filters => {
            let terms: Vec<GoldTerm> =
                serde_json::from_str(cell).map_err(|e| alloc::format!("filter gold must be a JSON list of {{term, scope}}: {e}"))?;
            if terms.iter().any(|t| t.term.trim().is_empty()) {
                return Err("filter gold has an empty term".into());
            }
            Ok(Gold::Filters(terms))
        }
        Task::Invalids => match cell {
            "" | "false" | "no" => Ok(Gold::Invalid),
            other => Err(alloc::format!("invalid-question gold must be `false`, got `{other}`")),
        },
    }
}

fn positions<'de, D: Deserializer<'de>>(deserializer: D) -> Result<Option<Vec<u64>>, D::Error> {
    let value = Option::<Value>::deserialize(deserializer)?;
    match value {
        None | Some(Value::Null) => Ok(None),
        Some(Value::String(s)) if s.trim().eq_ignore_ascii_case("unknown") => Ok(None),
        Some(v) => positions_from(&v).map(Some).map_err(serde::de::Error::custom),
    }
}

/// Model output for one case.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "task", rename_all = "snake_case")]
pub enum Predicted {
    Scope {
        label: String,
    },
    Granularity {
        label: String,
    },
    Variants {
        #[serde(default)]
        chrom: Option<String>,
        #[serde(default, deserialize_with = "positions")]
        start: Option<Vec<u64>>,
        #[serde(default, deserialize_with = "positions")]
        end: Option<Vec<u64>>,
    },
    Filters {
        #[serde(default)]
        terms: Vec<String>,
    },
    Invalids {
        valid: bool,
    },
}

impl Predicted {
    pub fn task(&self) -> Task {
        match self {
            Predicted::Scope { .. } => Task::Scope,
            Predicted::Granularity { .. } => Task::Granularity,
            Predicted::Variants { .. } => Task::Variants,
            Predicted::Filters { .. } => Task::Filters,
            Predicted::Invalids { .. } => Task::Invalids,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prediction {
    pub id: String,
    #[serde(flatten)]
    pub output: Predicted,
    #[serde(default)]
    pub unknown: bool,
}

impl Prediction {
    /// Flagged unknown, or a label prediction of `unknown`.
    pub fn is_unknown(&self) -> bool {
        self.unknown
            || match &self.output {
                Predicted::Scope { label } | Predicted::Granularity { label } => {
                    label.trim().eq_ignore_ascii_case("unknown")
                }
                _ => false,
            }
    }

    /// The prediction a perfect model would make.
    pub fn oracle(case: &EvalCase) -> Prediction {
        let output = match &case.gold {
            Gold::Scope(s) => Predicted::Scope { label: s.as_str().into() },
            Gold::Granularity(g) => Predicted::Granularity { label: g.as_str().into() },
            Gold::Variants(v) => Predicted::Variants {
                chrom: v.chrom.as_ref().map(|c| c.as_str().into()),
                start: (!v.start.is_empty()).then(|| v.start.clone()),
                end: (!v.end.is_empty()).then(|| v.end.clone()),
            },
            Gold::Filters(terms) => Predicted::Filters { terms: terms.iter().map(|t| t.term.clone()).collect() },
            Gold::Invalid => Predicted::Invalids { valid: false },
        };
        Prediction { id: case.id.clone(), output, unknown: false }
    }
}
