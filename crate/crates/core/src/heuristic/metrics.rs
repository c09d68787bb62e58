use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::text::{normalize_word, sentences, symbol_count, STOP_WORDS};

/// Everything the drop rules compare against.
///
/// Fractions are in [0, 1]; `ngram_fractions` holds n = 2..=10 (top n-gram
/// coverage for n <= 4, duplicate n-gram coverage above).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DocMetrics {
    pub char_count: usize,
    pub word_count: usize,
    pub letter_chars: usize,
    pub digit_chars: usize,
    /// Most frequent non-whitespace character and its count.
    pub most_common_char: Option<(char, usize)>,
    pub top_word_fraction: f64,
    pub words_with_letter_fraction: f64,
    pub stopword_count: usize,
    pub mean_word_length: f64,
    pub line_count: usize,
    pub third_longest_line_len: usize,
    pub newline_fraction: f64,
    pub max_word_len: usize,
    pub max_sentence_words: usize,
    pub symbol_count: usize,
    pub symbol_to_word_ratio: f64,
    pub ngram_fractions: BTreeMap<usize, f64>,
    pub dup_line_fraction: f64,
    pub dup_para_fraction: f64,
}

pub fn compute_metrics(text: &str) -> DocMetrics {
    let stop: Vec<String> = STOP_WORDS.iter().map(|s| s.to_string()).collect();
    compute_metrics_with(text, &stop)
}

/// Fraction of word characters covered by the given word positions.
fn coverage(covered: &[bool], lens: &[usize], total: usize) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let hit: usize = covered.iter().zip(lens).filter(|(c, _)| **c).map(|(_, l)| l).sum();
    hit as f64 / total as f64
}

fn top_ngram_fraction(norm: &[String], lens: &[usize], total: usize, n: usize) -> f64 {
    if norm.len() < n {
        return 0.0;
    }
    let mut counts: HashMap<&[String], usize> = HashMap::new();
    for gram in norm.windows(n) {
        *counts.entry(gram).or_default() += 1;
    }
    let top = counts
        .iter()
        .max_by(|a, b| a.1.cmp(b.1).then_with(|| b.0.cmp(a.0)))
        .map(|(g, _)| *g)
        .expect("non-empty");
    let mut covered = vec![false; norm.len()];
    for (i, gram) in norm.windows(n).enumerate() {
        if gram == top {
            covered[i..i + n].iter_mut().for_each(|c| *c = true);
        }
    }
    coverage(&covered, lens, total)
}

fn dup_ngram_fraction(norm: &[String], lens: &[usize], total: usize, n: usize) -> f64 {
    if norm.len() < n {
        return 0.0;
    }
    let mut counts: HashMap<&[String], usize> = HashMap::new();
    for gram in norm.windows(n) {
        *counts.entry(gram).or_default() += 1;
    }
    let mut covered = vec![false; norm.len()];
    for (i, gram) in norm.windows(n).enumerate() {
        if counts[gram] >= 2 {
            covered[i..i + n].iter_mut().for_each(|c| *c = true);
        }
    }
    coverage(&covered, lens, total)
}

/// Character fraction of items that repeat an earlier identical item.
fn duplicate_fraction<'a>(items: impl Iterator<Item = &'a str>) -> f64 {
    let mut seen = std::collections::HashSet::new();
    let (mut dup, mut total) = (0usize, 0usize);
    for item in items {
        let len = item.chars().count();
        total += len;
        if !seen.insert(item) {
            dup += len;
        }
    }
    if total == 0 {
        0.0
    } else {
        dup as f64 / total as f64
    }
}

/// Fraction of line characters belonging to repeats of an earlier line.
pub fn duplicate_line_fraction(text: &str) -> f64 {
    duplicate_fraction(text.split('\n').map(str::trim).filter(|l| !l.is_empty()))
}

fn paragraphs(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut start = 0;
    let lines: Vec<(usize, &str)> = text.split('\n').scan(0, |pos, l| {
        let at = *pos;
        *pos += l.len() + 1;
        Some((at, l))
    }).collect();
    let mut in_para = false;
    for (at, line) in &lines {
        let blank = line.trim().is_empty();
        if blank && in_para {
            out.push(text[start..*at - 1].trim());
            in_para = false;
        } else if !blank && !in_para {
            start = *at;
            in_para = true;
        }
    }
    if in_para {
        out.push(text[start..].trim());
    }
    out
}

pub fn compute_metrics_with(text: &str, stop_words: &[String]) -> DocMetrics {
    if text.is_empty() {
        return DocMetrics { ngram_fractions: (2..=10).map(|n| (n, 0.0)).collect(), ..Default::default() };
    }

    let mut char_count = 0;
    let mut letter_chars = 0;
    let mut digit_chars = 0;
    let mut newlines = 0;
    let mut char_freq: BTreeMap<char, usize> = BTreeMap::new();
    for c in text.chars() {
        char_count += 1;
        if c.is_alphabetic() {
            letter_chars += 1;
        } else if c.is_numeric() {
            digit_chars += 1;
        }
        if c == '\n' {
            newlines += 1;
        }
        if !c.is_whitespace() {
            *char_freq.entry(c).or_default() += 1;
        }
    }
    // BTreeMap iteration is ascending, so ties resolve to the smallest code point.
    let most_common_char = char_freq
        .iter()
        .fold(None, |best: Option<(char, usize)>, (&c, &n)| match best {
            Some((_, m)) if m >= n => best,
            _ => Some((c, n)),
        });

    let raw_words: Vec<&str> = text.split_whitespace().collect();
    let word_count = raw_words.len();
    let lens: Vec<usize> = raw_words.iter().map(|w| w.chars().count()).collect();
    let total_word_chars: usize = lens.iter().sum();
    let norm: Vec<String> = raw_words.iter().map(|w| normalize_word(w)).collect();

    let mut word_freq: HashMap<&str, usize> = HashMap::new();
    for w in norm.iter().filter(|w| !w.is_empty()) {
        *word_freq.entry(w.as_str()).or_default() += 1;
    }
    let top_word = word_freq.values().copied().max().unwrap_or(0);
    let stopword_count = norm.iter().filter(|w| stop_words.iter().any(|s| s == *w)).count();
    let with_letter = raw_words.iter().filter(|w| w.chars().any(char::is_alphabetic)).count();

    let frac = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };

    let content_lines: Vec<&str> = text.split('\n').filter(|l| !l.trim().is_empty()).collect();
    let mut line_lens: Vec<usize> = content_lines.iter().map(|l| l.trim().chars().count()).collect();
    line_lens.sort_unstable_by(|a, b| b.cmp(a));

    let max_sentence_words = sentences(text).iter().map(|s| s.split_whitespace().count()).max().unwrap_or(0);
    let symbols = symbol_count(text);

    let mut ngram_fractions = BTreeMap::new();
    for n in 2..=4 {
        ngram_fractions.insert(n, top_ngram_fraction(&norm, &lens, total_word_chars, n));
    }
    for n in 5..=10 {
        ngram_fractions.insert(n, dup_ngram_fraction(&norm, &lens, total_word_chars, n));
    }

    DocMetrics {
        char_count,
        word_count,
        letter_chars,
        digit_chars,
        most_common_char,
        top_word_fraction: frac(top_word, word_count),
        words_with_letter_fraction: frac(with_letter, word_count),
        stopword_count,
        mean_word_length: frac(total_word_chars, word_count),
        line_count: content_lines.len(),
        third_longest_line_len: line_lens.get(2).copied().unwrap_or(0),
        newline_fraction: frac(newlines, char_count),
        max_word_len: lens.iter().copied().max().unwrap_or(0),
        max_sentence_words,
        symbol_count: symbols,
        symbol_to_word_ratio: frac(symbols, word_count),
        ngram_fractions,
        dup_line_fraction: duplicate_fraction(content_lines.iter().map(|l| l.trim())),
        dup_para_fraction: duplicate_fraction(paragraphs(text).into_iter()),
    }
}
