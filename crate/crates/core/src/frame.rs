//! Tabular view of record responses.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use serde_json::Value;

pub const DEFAULT_ROW_CAP: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnKind {
    Text,
    Integer,
    Real,
    Boolean,
    Object,
    List,
}

impl ColumnKind {
    /// Kind of a single non-null JSON value.
    pub fn of(value: &Value) -> Option<ColumnKind> {
        Some(match value {
            Value::Null => return None,
            Value::Bool(_) => ColumnKind::Boolean,
            Value::Number(n) if n.is_i64() || n.is_u64() => ColumnKind::Integer,
            Value::Number(_) => ColumnKind::Real,
            Value::String(_) => ColumnKind::Text,
            Value::Array(_) => ColumnKind::List,
            Value::Object(_) => ColumnKind::Object,
        })
    }

    /// Least kind that holds both.
    pub fn join(self, other: ColumnKind) -> ColumnKind {
        use ColumnKind::*;
        match (self, other) {
            (a, b) if a == b => a,
            (Integer, Real) | (Real, Integer) => Real,
            _ => Object,
        }
    }

    /// Hint token for the code-generation prompt: `'list'`, `'dict'` or `'str'`.
    pub fn hint(self) -> &'static str {
        match self {
            ColumnKind::List => "list",
            ColumnKind::Object => "dict",
            _ => "str",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub kind: ColumnKind,
}

/// Rectangular table: every row has one cell per column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultFrame {
    #[serde(default)]
    pub name: Option<String>,
    pub columns: Vec<Column>,
    pub rows: Vec<Vec<Value>>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FrameError {
    #[error("record {0} is not a JSON object")]
    NotAnObject(usize),
    #[error("{rows} records exceed the cap of {cap}")]
    TooManyRows { rows: usize, cap: usize },
}

impl ResultFrame {
    pub fn empty() -> Self {
        ResultFrame { name: None, columns: Vec::new(), rows: Vec::new() }
    }

    /// Flattens top-level attributes into columns in first-appearance order
    /// (keys within one record are visited in sorted order).
    /// Missing attributes become null cells; nested values stay whole.
    pub fn from_records(records: &[Value], cap: usize) -> Result<Self, FrameError> {
        if records.len() > cap {
            return Err(FrameError::TooManyRows { rows: records.len(), cap });
        }
        let mut names: Vec<String> = Vec::new();
        let mut kinds: Vec<Option<ColumnKind>> = Vec::new();
        for (i, record) in records.iter().enumerate() {
            let obj = record.as_object().ok_or(FrameError::NotAnObject(i))?;
            for (key, value) in obj {
                let idx = match names.iter().position(|n| n == key) {
                    Some(idx) => idx,
                    None => {
                        names.push(key.clone());
                        kinds.push(None);
                        names.len() - 1
                    }
                };
                if let Some(kind) = ColumnKind::of(value) {
                    kinds[idx] = Some(kinds[idx].map_or(kind, |k| k.join(kind)));
                }
            }
        }
        let rows = records
            .iter()
            .map(|record| {
                let obj = record.as_object().expect("checked above");
                names.iter().map(|n| obj.get(n).cloned().unwrap_or(Value::Null)).collect()
            })
            .collect();
        let columns = names
            .into_iter()
            .zip(kinds)
            .map(|(name, kind)| Column { name, kind: kind.unwrap_or(ColumnKind::Text) })
            .collect();
        Ok(ResultFrame { name: None, columns, rows })
    }

    pub fn named(mut self, name: impl Into<String>) -> Self {
        self.name = Some(name.into());
        self
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn is_rectangular(&self) -> bool {
        self.rows.iter().all(|r| r.len() == self.columns.len())
    }

    /// Cell rendering for delimited text: scalars print bare, nested values
    /// as compact JSON, null as the empty string.
    pub fn cell_text(value: &Value) -> String {
        match value {
            Value::Null => String::new(),
            Value::String(s) => s.clone(),
            Value::Bool(b) => b.to_string(),
            Value::Number(n) => n.to_string(),
            nested => serde_json::to_string(nested).unwrap_or_default(),
        }
    }
}

/// A query answer as stored by a tab.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "granularity", content = "result", rename_all = "snake_case")]
pub enum QueryResult {
    Record(ResultFrame),
    Count(u64),
    Boolean(bool),
}
