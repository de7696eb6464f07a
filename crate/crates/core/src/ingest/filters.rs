//! Removal steps 1-3 and 5 of the cleaning pipeline. Each returns `(kept, removed)`
//! and preserves input order.

use std::collections::HashSet;

use super::text::normalize;
use super::{CorpusItem, RawItem};

const DATE_SEPARATORS: [char; 4] = ['.', '/', ':', '-'];

/// True when the text is only digits once whitespace and date separators are gone.
pub fn is_numeric_or_date(text: &str) -> bool {
    let mut digits = 0usize;
    for c in text.chars() {
        if c.is_whitespace() || DATE_SEPARATORS.contains(&c) {
            continue;
        }
        if !c.is_ascii_digit() {
            return false;
        }
        digits += 1;
    }
    digits > 0
}

pub fn filter_numeric_date(items: Vec<RawItem>) -> (Vec<RawItem>, Vec<RawItem>) {
    items
        .into_iter()
        .partition(|item| !is_numeric_or_date(&item.raw_text))
}

pub fn is_stopword_only(text: &str, stopwords: &HashSet<String>) -> bool {
    if stopwords.is_empty() {
        return false;
    }
    let mut tokens = text.split_whitespace().peekable();
    tokens.peek().is_some() && tokens.all(|t| stopwords.contains(&t.to_lowercase()))
}

pub fn filter_stopword_only(
    items: Vec<RawItem>,
    stopwords: &HashSet<String>,
) -> (Vec<RawItem>, Vec<RawItem>) {
    items
        .into_iter()
        .partition(|item| !is_stopword_only(&item.raw_text, stopwords))
}

pub fn filter_place_names(
    items: Vec<RawItem>,
    gazetteer: &HashSet<String>,
) -> (Vec<RawItem>, Vec<RawItem>) {
    if gazetteer.is_empty() {
        return (items, Vec::new());
    }
    items
        .into_iter()
        .partition(|item| !gazetteer.contains(&normalize(&item.raw_text)))
}

pub fn frequency_filter(
    items: Vec<CorpusItem>,
    min_count: u64,
) -> (Vec<CorpusItem>, Vec<CorpusItem>) {
    items
        .into_iter()
        .partition(|item| item.total_count >= min_count)
}
