//! Brute-force reference implementations.

/// Splits on every non-alphanumeric character and lowercases, one char at a time.
fn words(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut current = String::new();
    for c in text.chars() {
        if c.is_alphanumeric() {
            current.extend(c.to_lowercase());
        } else if !current.is_empty() {
            out.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        out.push(current);
    }
    out
}

/// ROUGE-1 (precision, recall) by pairing each candidate word with an unused
/// equal reference word. Two empty texts score 1, one empty text scores 0.
pub fn rouge1_brute(candidate: &str, reference: &str) -> (f64, f64) {
    let cand = words(candidate);
    let refr = words(reference);
    if cand.is_empty() || refr.is_empty() {
        let both = cand.is_empty() && refr.is_empty();
        return if both { (1.0, 1.0) } else { (0.0, 0.0) };
    }
    let mut used = vec![false; refr.len()];
    let mut overlap = 0usize;
    for w in &cand {
        if let Some(k) = (0..refr.len()).find(|&k| !used[k] && refr[k] == *w) {
            used[k] = true;
            overlap += 1;
        }
    }
    (overlap as f64 / cand.len() as f64, overlap as f64 / refr.len() as f64)
}
