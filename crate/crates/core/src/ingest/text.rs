//! String primitives used by the cleaning pipeline: normalization, fingerprint
//! keys and edit distance.

use std::sync::OnceLock;

use regex::Regex;

/// Strips surrounding whitespace and lowercases. Interior whitespace is kept.
pub fn normalize(text: &str) -> String {
    text.trim().to_lowercase()
}

fn punctuation() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\p{P}").expect("static regex"))
}

/// Key-collision fingerprint: normalize, drop Unicode punctuation, split on
/// whitespace, dedupe and sort the tokens, join with single spaces.
pub fn fingerprint_key(text: &str) -> String {
    let normalized = normalize(text);
    let stripped = punctuation().replace_all(&normalized, "");
    let mut tokens: Vec<&str> = stripped.split_whitespace().collect();
    tokens.sort_unstable();
    tokens.dedup();
    tokens.join(" ")
}

/// Unit-cost edit distance over Unicode scalar values.
pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    levenshtein_chars(&a, &b)
}

pub(crate) fn levenshtein_chars(a: &[char], b: &[char]) -> usize {
    // keep the rolling row on the shorter side
    let (long, short) = if a.len() >= b.len() { (a, b) } else { (b, a) };
    if short.is_empty() {
        return long.len();
    }
    let mut row: Vec<usize> = (0..=short.len()).collect();
    for (i, &lc) in long.iter().enumerate() {
        let mut diag = row[0];
        row[0] = i + 1;
        for (j, &sc) in short.iter().enumerate() {
            let above = row[j + 1];
            let substitution = diag + usize::from(lc != sc);
            row[j + 1] = substitution.min(above + 1).min(row[j] + 1);
            diag = above;
        }
    }
    row[short.len()]
}

/// Returns `Some(distance)` when the edit distance is at most `bound`, `None`
/// otherwise. Stops as soon as every cell of a row exceeds the bound.
pub(crate) fn levenshtein_within(a: &[char], b: &[char], bound: usize) -> Option<usize> {
    if a.len().abs_diff(b.len()) > bound {
        return None;
    }
    let (long, short) = if a.len() >= b.len() { (a, b) } else { (b, a) };
    if short.is_empty() {
        return (long.len() <= bound).then_some(long.len());
    }
    let mut row: Vec<usize> = (0..=short.len()).collect();
    for (i, &lc) in long.iter().enumerate() {
        let mut diag = row[0];
        row[0] = i + 1;
        let mut row_min = row[0];
        for (j, &sc) in short.iter().enumerate() {
            let above = row[j + 1];
            let substitution = diag + usize::from(lc != sc);
            row[j + 1] = substitution.min(above + 1).min(row[j] + 1);
            diag = above;
            row_min = row_min.min(row[j + 1]);
        }
        if row_min > bound {
            return None;
        }
    }
    let d = row[short.len()];
    (d <= bound).then_some(d)
}
