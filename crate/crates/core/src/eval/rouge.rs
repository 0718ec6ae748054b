//! ROUGE-1 with clipped unigram counts.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Prf {
    pub const ONE: Prf = Prf { precision: 1.0, recall: 1.0, f1: 1.0 };
    pub const ZERO: Prf = Prf { precision: 0.0, recall: 0.0, f1: 0.0 };

    /// Builds the triple with `f1` as the harmonic mean of `p` and `r`.
    pub fn from_pr(precision: f64, recall: f64) -> Prf {
        Prf { precision, recall, f1: harmonic(precision, recall) }
    }
}

pub fn harmonic(p: f64, r: f64) -> f64 {
    if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 }
}

/// Lowercased alphanumeric runs.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(|t| t.chars().flat_map(char::to_lowercase).collect())
        .collect()
}

fn counts(tokens: &[String]) -> BTreeMap<&str, usize> {
    let mut map = BTreeMap::new();
    for t in tokens {
        *map.entry(t.as_str()).or_insert(0) += 1;
    }
    map
}

pub fn rouge1_prf(candidate: &str, reference: &str) -> Prf {
    let cand = tokenize(candidate);
    let refr = tokenize(reference);
    match (cand.is_empty(), refr.is_empty()) {
        (true, true) => return Prf::ONE,
        (true, false) | (false, true) => return Prf::ZERO,
        _ => {}
    }
    let cand_counts = counts(&cand);
    let ref_counts = counts(&refr);
    let matched: usize = cand_counts
        .iter()
        .map(|(tok, n)| ref_counts.get(tok).map_or(0, |m| (*n).min(*m)))
        .sum();
    Prf::from_pr(matched as f64 / cand.len() as f64, matched as f64 / refr.len() as f64)
}
