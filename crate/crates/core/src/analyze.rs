//! Text analysis chain: lowercase, split on non-alphanumerics, stopword
//! removal, Porter stemming.

use crate::porter;

/// The classic 33-word SMART-derived English stopword list.
pub const STOPWORDS: &[&str] = &[
    "a", "an", "and", "are", "as", "at", "be", "but", "by", "for", "if", "in", "into", "is", "it",
    "no", "not", "of", "on", "or", "such", "that", "the", "their", "then", "there", "these",
    "they", "this", "to", "was", "will", "with",
];

/// Pure-digit tokens longer than this are dropped (serial numbers, hashes).
const MAX_DIGIT_RUN: usize = 16;

fn is_stopword(token: &str) -> bool {
    STOPWORDS.contains(&token)
}

/// Analyze raw text into index/query tokens. Deterministic; empty input
/// yields an empty list; duplicates are preserved.
pub fn analyze(text: &str) -> Vec<String> {
    let lowered = text.to_lowercase();
    lowered
        .split(|c: char| !c.is_alphanumeric())
        .filter(|tok| !tok.is_empty())
        .filter(|tok| !(tok.len() > MAX_DIGIT_RUN && tok.chars().all(|c| c.is_ascii_digit())))
        .filter(|tok| !is_stopword(tok))
        .map(porter::stem)
        .collect()
}
