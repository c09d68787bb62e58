//! Text primitives shared by the filtering rules and the corpus statistics.
//!
//! Heuristic filtering and the statistics report must agree on what a word,
//! a sentence, a stop word and a symbol are, so those definitions live here
//! and nowhere else.

use unicode_general_category::{get_general_category, GeneralCategory};

/// Function words used as an English-prose indicator.
pub const STOP_WORDS: [&str; 8] = ["the", "be", "to", "of", "and", "that", "have", "with"];

/// Words are maximal runs of non-whitespace characters.
pub fn words(text: &str) -> impl Iterator<Item = &str> {
    text.split_whitespace()
}

/// Lowercases a word and strips leading/trailing non-alphanumeric characters.
///
/// A word made only of punctuation normalizes to the empty string.
pub fn normalize_word(word: &str) -> String {
    word.trim_matches(|c: char| !c.is_alphanumeric()).to_lowercase()
}

pub fn is_stop_word(word: &str) -> bool {
    let w = normalize_word(word);
    STOP_WORDS.contains(&w.as_str())
}

/// True for any character in a Unicode punctuation category (Pc, Pd, Ps, Pe, Pi, Pf, Po).
pub fn is_punctuation(c: char) -> bool {
    matches!(
        get_general_category(c),
        GeneralCategory::ConnectorPunctuation
            | GeneralCategory::DashPunctuation
            | GeneralCategory::OpenPunctuation
            | GeneralCategory::ClosePunctuation
            | GeneralCategory::InitialPunctuation
            | GeneralCategory::FinalPunctuation
            | GeneralCategory::OtherPunctuation
    )
}

/// Invisible characters: the Unicode format category (Cf), which includes
/// zero-width space/joiners, directional marks and the byte-order mark.
pub fn is_invisible(c: char) -> bool {
    get_general_category(c) == GeneralCategory::Format
}

/// C1 control characters, typical leftovers of a wrong charset guess.
pub fn is_c1_control(c: char) -> bool {
    ('\u{80}'..='\u{9f}').contains(&c)
}

/// Splits text into sentences: a sentence ends at `.`, `!` or `?` followed by
/// whitespace or end of text. Empty (whitespace-only) pieces are skipped.
pub fn sentences(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut start = 0;
    let mut chars = text.char_indices().peekable();
    while let Some((i, c)) = chars.next() {
        if matches!(c, '.' | '!' | '?') {
            let at_boundary = match chars.peek() {
                None => true,
                Some(&(_, next)) => next.is_whitespace(),
            };
            if at_boundary {
                let end = i + c.len_utf8();
                let piece = &text[start..end];
                if !piece.trim().is_empty() {
                    out.push(piece);
                }
                start = end;
            }
        }
    }
    if start < text.len() && !text[start..].trim().is_empty() {
        out.push(&text[start..]);
    }
    out
}

/// Counts symbol occurrences: `#`, the ellipsis character `…`, and each
/// `...` run (three or more dots count once).
pub fn symbol_count(text: &str) -> usize {
    let mut count = 0;
    let mut dots = 0;
    for c in text.chars() {
        if c == '.' {
            dots += 1;
            continue;
        }
        if dots >= 3 {
            count += 1;
        }
        dots = 0;
        if c == '#' || c == '…' {
            count += 1;
        }
    }
    if dots >= 3 {
        count += 1;
    }
    count
}

/// Pluggable token counter used for token totals in stage statistics and
/// quality budgets.
pub trait Tokenizer: Send + Sync {
    fn count_tokens(&self, text: &str) -> usize;
}

/// Unicode-whitespace word splitting.
#[derive(Debug, Clone, Copy, Default)]
pub struct WhitespaceTokenizer;

impl Tokenizer for WhitespaceTokenizer {
    fn count_tokens(&self, text: &str) -> usize {
        text.split_whitespace().count()
    }
}
