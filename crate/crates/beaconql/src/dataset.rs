//! Evaluation dataset and prediction files.
//!
//! A dataset is a directory of tab-separated files, one per task, each with
//! the header `id<TAB>task<TAB>question<TAB>gold`. Predictions are JSON lines, one
//! [`Prediction`] per line; the model name is the file stem.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use beaconql_core::eval::{parse_gold, EvalCase, Prediction, Task};

pub const HEADER: [&str; 4] = ["id", "task", "question", "gold"];

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{file}:{row}: {message}")]
pub struct FormatError {
    pub file: String,
    /// 1-based line number; 0 for whole-file problems.
    pub row: usize,
    pub message: String,
}

impl FormatError {
    fn new(file: &Path, row: usize, message: impl Into<String>) -> Self {
        FormatError { file: file.display().to_string(), row, message: message.into() }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    pub cases: Vec<EvalCase>,
}

impl Dataset {
    pub fn counts(&self) -> BTreeMap<Task, usize> {
        let mut counts = BTreeMap::new();
        for case in &self.cases {
            *counts.entry(case.task()).or_insert(0) += 1;
        }
        counts
    }

    pub fn of_task(&self, task: Task) -> impl Iterator<Item = &EvalCase> {
        self.cases.iter().filter(move |c| c.task() == task)
    }
}

fn read_text(path: &Path) -> Result<String, FormatError> {
    std::fs::read_to_string(path).map_err(|e| FormatError::new(path, 0, e.to_string()))
}

/// Parses one task file.
pub fn parse_task_file(path: &Path, text: &str) -> Result<Vec<EvalCase>, FormatError> {
    if text.trim().is_empty() {
        return Err(FormatError::new(path, 0, "file is empty"));
    }
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(b'\t')
        .quoting(false)
        .flexible(true)
        .from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| FormatError::new(path, 1, e.to_string()))?;
    if header.iter().map(str::trim).ne(HEADER) {
        return Err(FormatError::new(path, 1, format!("header must be `{}`", HEADER.join("\\t"))));
    }
    let mut cases = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| FormatError::new(path, e.position().map_or(0, |p| p.line() as usize), e.to_string()))?;
        let row = record.position().map_or(0, |p| p.line() as usize);
        if record.len() != HEADER.len() {
            return Err(FormatError::new(path, row, format!("expected {} fields, found {}", HEADER.len(), record.len())));
        }
        let id = record[0].trim();
        if id.is_empty() {
            return Err(FormatError::new(path, row, "empty id"));
        }
        let task: Task = record[1].parse().map_err(|e: String| FormatError::new(path, row, e))?;
        let question = record[2].trim();
        if question.is_empty() {
            return Err(FormatError::new(path, row, "empty question"));
        }
        let gold = parse_gold(task, &record[3]).map_err(|e| FormatError::new(path, row, e))?;
        cases.push(EvalCase { id: id.into(), question: question.into(), gold });
    }
    if cases.is_empty() {
        return Err(FormatError::new(path, 0, "no cases"));
    }
    Ok(cases)
}

/// Loads a single task file or every `*.tsv` in a directory (sorted by name).
pub fn load_dataset(path: &Path) -> Result<Dataset, FormatError> {
    let files: Vec<PathBuf> = if path.is_dir() {
        let entries = std::fs::read_dir(path).map_err(|e| FormatError::new(path, 0, e.to_string()))?;
        let mut files: Vec<PathBuf> = entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "tsv"))
            .collect();
        files.sort();
        files
    } else {
        vec![path.to_path_buf()]
    };
    if files.is_empty() {
        return Err(FormatError::new(path, 0, "no .tsv files"));
    }
    let mut cases: Vec<EvalCase> = Vec::new();
    for file in files {
        for case in parse_task_file(&file, &read_text(&file)?)? {
            if cases.iter().any(|c| c.id == case.id) {
                return Err(FormatError::new(&file, 0, format!("duplicate case id `{}`", case.id)));
            }
            cases.push(case);
        }
    }
    Ok(Dataset { cases })
}

pub fn parse_predictions(path: &Path, text: &str) -> Result<Vec<Prediction>, FormatError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let prediction: Prediction = serde_json::from_str(line).map_err(|e| FormatError::new(path, i + 1, e.to_string()))?;
        out.push(prediction);
    }
    Ok(out)
}

/// Returns the model name (file stem) and its predictions.
pub fn load_predictions(path: &Path) -> Result<(String, Vec<Prediction>), FormatError> {
    let model = path.file_stem().map_or_else(|| "model".into(), |s| s.to_string_lossy().into_owned());
    Ok((model, parse_predictions(path, &read_text(path)?)?))
}

pub fn write_predictions(predictions: &[Prediction]) -> String {
    let mut out = String::new();
    for p in predictions {
        out.push_str(&serde_json::to_string(p).expect("prediction serializes"));
        out.push('\n');
    }
    out
}
