//! Table and JSON rendering of metric reports.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::metrics::ModelReport;
use super::Task;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub models: Vec<ModelReport>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Table,
    Json,
}

impl core::str::FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "table" => Ok(ReportFormat::Table),
            "json" => Ok(ReportFormat::Json),
            other => Err(format!("unknown report format `{other}`")),
        }
    }
}

pub const TABLE_COLUMNS: [(&str, Task); 5] = [
    ("Scope extraction", Task::Scope),
    ("Granularity extraction", Task::Granularity),
    ("Variants extraction", Task::Variants),
    ("Filters extraction", Task::Filters),
    ("Query validation", Task::Invalids),
];

fn cell(value: Option<f64>) -> String {
    value.map_or_else(|| "-".into(), |v| format!("{v:.3}"))
}

fn table(report: &MetricsReport) -> String {
    let mut out = String::from("Model\tMetric");
    for (head, _) in TABLE_COLUMNS {
        out.push('\t');
        out.push_str(head);
    }
    out.push('\n');
    for model in &report.models {
        type Getter = fn(&ModelReport, Task) -> Option<f64>;
        let rows: [(&str, Getter); 7] = [
            ("Precision", |m, t| m.task(t).map(|s| s.precision)),
            ("Recall", |m, t| m.task(t).map(|s| s.recall)),
            ("F1-score", |m, t| m.task(t).map(|s| s.f1)),
            ("Unknown rate", |m, t| {
                m.task(t).filter(|_| matches!(t, Task::Scope | Task::Granularity)).map(|s| s.unknown_rate)
            }),
            ("Extraction accuracy", |m, t| terms(m, t).map(|r| r.extraction_accuracy)),
            ("Incompleteness", |m, t| terms(m, t).map(|r| r.incompleteness)),
            ("Hallucination rate", |m, t| terms(m, t).map(|r| r.hallucination_rate)),
        ];
        for (i, (label, get)) in rows.iter().enumerate() {
            out.push_str(if i == 0 { &model.model } else { "" });
            out.push('\t');
            out.push_str(label);
            for (_, task) in TABLE_COLUMNS {
                out.push('\t');
                out.push_str(&cell(get(model, task)));
            }
            out.push('\n');
        }
    }
    out
}

fn terms(m: &ModelReport, t: Task) -> Option<&super::TermRates> {
    match t {
        Task::Variants if m.task(t).is_some() => Some(&m.variant_terms),
        Task::Filters if m.task(t).is_some() => Some(&m.filter_terms),
        _ => None,
    }
}

pub fn emit_report(report: &MetricsReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Table => table(report),
        ReportFormat::Json => {
            let mut text = serde_json::to_string_pretty(report).expect("report serializes");
            text.push('\n');
            text
        }
    }
}

pub fn parse_report_json(text: &str) -> Result<MetricsReport, serde_json::Error> {
    serde_json::from_str(text)
}
