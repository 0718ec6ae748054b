//! Per-task precision/recall/F1 and term-level rates.
//!
//! Task precision and recall are means of per-case values; task F1 is their
//! harmonic mean. Term rates pool gold terms from the variant fields
//! (chromosome, start, end) and from filter terms:
//!
//! * accuracy: matched gold terms / gold terms
//! * incompleteness: gold terms with no predicted counterpart / gold terms
//!   (a wrong prediction is neither matched nor missed)
//! * hallucination: cases with a predicted term matching no gold term / cases

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::rouge::{harmonic, rouge1_prf, Prf};
use super::{EvalCase, Gold, Predicted, Prediction, Task, VariantGold};
use crate::model::Chromosome;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    /// ROUGE-1 F1 a predicted term needs to count as matching a gold term.
    pub match_threshold: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig { match_threshold: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EvalError {
    #[error("no prediction for case `{0}`")]
    MissingPrediction(String),
    #[error("prediction for case `{id}` is a {found} prediction, the case is a {expected} case")]
    TaskMismatch { id: String, expected: Task, found: Task },
    #[error("case `{0}` has more than one prediction")]
    DuplicatePrediction(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskScores {
    pub task: Task,
    pub cases: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub unknown_rate: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TermCounts {
    pub gold_terms: usize,
    pub matched: usize,
    pub missed: usize,
    pub cases: usize,
    pub hallucinated_cases: usize,
}

impl core::ops::AddAssign for TermCounts {
    fn add_assign(&mut self, o: TermCounts) {
        self.gold_terms += o.gold_terms;
        self.matched += o.matched;
        self.missed += o.missed;
        self.cases += o.cases;
        self.hallucinated_cases += o.hallucinated_cases;
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 { 0.0 } else { num as f64 / den as f64 }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermRates {
    pub counts: TermCounts,
    pub extraction_accuracy: f64,
    pub incompleteness: f64,
    pub hallucination_rate: f64,
}

impl From<TermCounts> for TermRates {
    fn from(counts: TermCounts) -> Self {
        TermRates {
            counts,
            extraction_accuracy: ratio(counts.matched, counts.gold_terms),
            incompleteness: ratio(counts.missed, counts.gold_terms),
            hallucination_rate: ratio(counts.hallucinated_cases, counts.cases),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelReport {
    pub model: String,
    /// Tasks present in the dataset, in [`Task::ALL`] order.
    pub tasks: Vec<TaskScores>,
    pub unknown_rate: f64,
    pub extraction_accuracy: f64,
    pub incompleteness: f64,
    pub hallucination_rate: f64,
    pub variant_terms: TermRates,
    pub filter_terms: TermRates,
}

impl ModelReport {
    pub fn task(&self, task: Task) -> Option<&TaskScores> {
        self.tasks.iter().find(|t| t.task == task)
    }
}

/// One-to-one assignment of predicted to gold terms, greedy by descending
/// ROUGE-1 F1. Pairs under `threshold` never match. Returns
/// `(predicted index, gold index, scores)`.
pub fn greedy_match(predicted: &[String], gold: &[String], threshold: f64) -> Vec<(usize, usize, Prf)> {
    let mut pairs: Vec<(usize, usize, Prf)> = Vec::new();
    for (i, p) in predicted.iter().enumerate() {
        for (j, g) in gold.iter().enumerate() {
            let s = rouge1_prf(p, g);
            if s.f1 >= threshold && s.f1 > 0.0 {
                pairs.push((i, j, s));
            }
        }
    }
    pairs.sort_by(|a, b| b.2.f1.total_cmp(&a.2.f1).then(a.0.cmp(&b.0)).then(a.1.cmp(&b.1)));
    let mut used_p = alloc::vec![false; predicted.len()];
    let mut used_g = alloc::vec![false; gold.len()];
    let mut out = Vec::new();
    for (i, j, s) in pairs {
        if !used_p[i] && !used_g[j] {
            used_p[i] = true;
            used_g[j] = true;
            out.push((i, j, s));
        }
    }
    out
}

struct CaseScore {
    precision: f64,
    recall: f64,
    terms: Option<TermCounts>,
}

fn label_case(predicted: &str, gold: &str) -> CaseScore {
    let s = rouge1_prf(predicted, gold);
    CaseScore { precision: s.precision, recall: s.recall, terms: None }
}

fn set_pr(matched: f64, predicted: usize, gold: usize) -> (f64, f64) {
    match (predicted, gold) {
        (0, 0) => (1.0, 1.0),
        (0, _) | (_, 0) => (0.0, 0.0),
        (p, g) => (matched / p as f64, matched / g as f64),
    }
}

fn variants_case(
    gold: &VariantGold,
    chrom: &Option<String>,
    start: &Option<Vec<u64>>,
    end: &Option<Vec<u64>>,
) -> CaseScore {
    let pred_chrom = chrom.as_deref().map(|c| Chromosome::parse(c).map_or_else(|| String::from(c.trim()), |c| c.as_str().into()));
    let non_empty = |v: &Option<Vec<u64>>| v.as_ref().filter(|v| !v.is_empty()).cloned();
    let fields: [(Option<String>, Option<String>); 3] = [
        (gold.chrom.as_ref().map(|c| c.as_str().into()), pred_chrom),
        ((!gold.start.is_empty()).then(|| alloc::format!("{:?}", gold.start)), non_empty(start).map(|v| alloc::format!("{v:?}"))),
        ((!gold.end.is_empty()).then(|| alloc::format!("{:?}", gold.end)), non_empty(end).map(|v| alloc::format!("{v:?}"))),
    ];
    let mut counts = TermCounts { cases: 1, ..TermCounts::default() };
    let (mut n_pred, mut stray) = (0, false);
    for (g, p) in &fields {
        if g.is_some() {
            counts.gold_terms += 1;
        }
        if p.is_some() {
            n_pred += 1;
        }
        match (g, p) {
            (Some(g), Some(p)) if g == p => counts.matched += 1,
            (Some(_), None) => counts.missed += 1,
            (_, Some(_)) => stray = true,
            (None, None) => {}
        }
    }
    counts.hallucinated_cases = usize::from(stray);
    let (precision, recall) = set_pr(counts.matched as f64, n_pred, counts.gold_terms);
    CaseScore { precision, recall, terms: Some(counts) }
}

fn filters_case(gold: &[String], predicted: &[String], threshold: f64) -> CaseScore {
    let matches = greedy_match(predicted, gold, threshold);
    let unmatched_gold = gold.len() - matches.len();
    let unmatched_pred = predicted.len() - matches.len();
    let counts = TermCounts {
        gold_terms: gold.len(),
        matched: matches.len(),
        missed: unmatched_gold.saturating_sub(unmatched_pred),
        cases: 1,
        hallucinated_cases: usize::from(unmatched_pred > 0),
    };
    let (precision, recall) = match (predicted.len(), gold.len()) {
        (0, 0) => (1.0, 1.0),
        (0, _) | (_, 0) => (0.0, 0.0),
        (p, g) => (
            matches.iter().map(|m| m.2.precision).sum::<f64>() / p as f64,
            matches.iter().map(|m| m.2.recall).sum::<f64>() / g as f64,
        ),
    };
    CaseScore { precision, recall, terms: Some(counts) }
}

fn score_case(case: &EvalCase, prediction: &Prediction, config: &EvalConfig) -> Result<CaseScore, EvalError> {
    let mismatch = || EvalError::TaskMismatch { id: case.id.clone(), expected: case.task(), found: prediction.output.task() };
    Ok(match (&case.gold, &prediction.output) {
        (Gold::Scope(g), Predicted::Scope { label }) => label_case(label, g.as_str()),
        (Gold::Granularity(g), Predicted::Granularity { label }) => label_case(label, g.as_str()),
        (Gold::Variants(g), Predicted::Variants { chrom, start, end }) => variants_case(g, chrom, start, end),
        (Gold::Filters(g), Predicted::Filters { terms }) => {
            let gold: Vec<String> = g.iter().map(|t| t.term.clone()).collect();
            filters_case(&gold, terms, config.match_threshold)
        }
        (Gold::Invalid, Predicted::Invalids { valid }) => {
            let hit = if *valid { 0.0 } else { 1.0 };
            CaseScore { precision: hit, recall: hit, terms: None }
        }
        _ => return Err(mismatch()),
    })
}

pub fn evaluate(
    model: &str,
    cases: &[EvalCase],
    predictions: &[Prediction],
    config: &EvalConfig,
) -> Result<ModelReport, EvalError> {
    let mut by_id: BTreeMap<&str, &Prediction> = BTreeMap::new();
    for p in predictions {
        if by_id.insert(p.id.as_str(), p).is_some() {
            return Err(EvalError::DuplicatePrediction(p.id.clone()));
        }
    }

    #[derive(Default)]
    struct Acc {
        cases: usize,
        precision: f64,
        recall: f64,
        unknown: usize,
    }
    let mut acc: BTreeMap<Task, Acc> = BTreeMap::new();
    let mut variant_terms = TermCounts::default();
    let mut filter_terms = TermCounts::default();
    let mut unknown_total = 0;

    for case in cases {
        let prediction = by_id.get(case.id.as_str()).ok_or_else(|| EvalError::MissingPrediction(case.id.clone()))?;
        let score = score_case(case, prediction, config)?;
        let a = acc.entry(case.task()).or_default();
        a.cases += 1;
        a.precision += score.precision;
        a.recall += score.recall;
        if prediction.is_unknown() {
            a.unknown += 1;
            unknown_total += 1;
        }
        match (case.task(), score.terms) {
            (Task::Variants, Some(t)) => variant_terms += t,
            (Task::Filters, Some(t)) => filter_terms += t,
            _ => {}
        }
    }

    let tasks = Task::ALL
        .iter()
        .filter_map(|task| {
            let a = acc.get(task)?;
            let n = a.cases as f64;
            let (precision, recall) = (a.precision / n, a.recall / n);
            Some(TaskScores {
                task: *task,
                cases: a.cases,
                precision,
                recall,
                f1: harmonic(precision, recall),
                unknown_rate: a.unknown as f64 / n,
            })
        })
        .collect();

    let mut pooled = variant_terms;
    pooled += filter_terms;
    let pooled = TermRates::from(pooled);
    Ok(ModelReport {
        model: model.into(),
        tasks,
        unknown_rate: ratio(unknown_total, cases.len()),
        extraction_accuracy: pooled.extraction_accuracy,
        incompleteness: pooled.incompleteness,
        hallucination_rate: pooled.hallucination_rate,
        variant_terms: variant_terms.into(),
        filter_terms: filter_terms.into(),
    })
}
