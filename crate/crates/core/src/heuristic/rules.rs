use std::fmt;

use serde::{Deserialize, Serialize};

use super::{DocMetrics, HeuristicConfig, SymbolRatioMode};
use crate::corpus::FilterOutcome;
use crate::text::is_c1_control;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RuleId {
    R1,
    R2,
    R3,
    R4,
    R5,
    R6,
    R7,
    R8,
    R9,
    R10,
    R11,
    R12,
    R13,
    R14,
    R15,
    R16,
    R17,
    R18,
}

impl RuleId {
    pub const ALL: [RuleId; 18] = [
        RuleId::R1,
        RuleId::R2,
        RuleId::R3,
        RuleId::R4,
        RuleId::R5,
        RuleId::R6,
        RuleId::R7,
        RuleId::R8,
        RuleId::R9,
        RuleId::R10,
        RuleId::R11,
        RuleId::R12,
        RuleId::R13,
        RuleId::R14,
        RuleId::R15,
        RuleId::R16,
        RuleId::R17,
        RuleId::R18,
    ];

    pub fn describe(self) -> &'static str {
        match self {
            RuleId::R1 => "most common character is not a letter",
            RuleId::R2 => "letter-to-digit ratio too low",
            RuleId::R3 => "most frequent word too frequent",
            RuleId::R4 => "word count out of range",
            RuleId::R5 => "too few words containing a letter",
            RuleId::R6 => "too few stop words",
            RuleId::R7 => "mean word length out of range",
            RuleId::R8 => "too few lines or third-longest line too short",
            RuleId::R9 => "repetitive lines, paragraphs or n-grams",
            RuleId::R10 => "symbol-to-word ratio too high",
            RuleId::R11 => "only separator characters",
            RuleId::R12 => "long run of spaces or newlines",
            RuleId::R13 => "too many newlines",
            RuleId::R14 => "decoding-error characters",
            RuleId::R15 => "overlong word",
            RuleId::R16 => "overlong sentence",
            RuleId::R17 => "ends with a colon",
            RuleId::R18 => "image URL or URL-only content",
        }
    }
}

impl fmt::Display for RuleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RuleVerdict {
    pub rule: RuleId,
    pub failed: bool,
    pub values: Vec<(String, f64)>,
}

fn longest_run(text: &str, target: char) -> usize {
    let mut best = 0;
    let mut run = 0;
    for c in text.chars() {
        if c == target {
            run += 1;
            best = best.max(run);
        } else {
            run = 0;
        }
    }
    best
}

fn strip_url_punct(word: &str) -> &str {
    word.trim_matches(|c: char| matches!(c, '(' | ')' | '[' | ']' | '<' | '>' | '"' | '\'' | ',' | ';' | '.' | '!' | '?'))
}

fn is_url(word: &str) -> bool {
    let w = word.to_ascii_lowercase();
    (w.starts_with("http://") || w.starts_with("https://") || w.starts_with("www.")) && w.len() > 8
}

fn is_image_url(word: &str, extensions: &[String]) -> bool {
    let word = strip_url_punct(word);
    if !is_url(word) {
        return false;
    }
    let path = word.split(['?', '#']).next().unwrap_or(word);
    let Some((_, ext)) = path.rsplit_once('.') else { return false };
    extensions.iter().any(|e| e.eq_ignore_ascii_case(ext))
}

/// Evaluates every rule independently. The returned verdicts are in rule order.
pub fn evaluate_rules(m: &DocMetrics, text: &str, cfg: &HeuristicConfig) -> Vec<RuleVerdict> {
    RuleId::ALL.iter().map(|&rule| evaluate_rule(rule, m, text, cfg)).collect()
}

fn verdict(rule: RuleId, failed: bool, values: &[(&str, f64)]) -> RuleVerdict {
    RuleVerdict { rule, failed, values: values.iter().map(|(k, v)| (k.to_string(), *v)).collect() }
}

fn evaluate_rule(rule: RuleId, m: &DocMetrics, text: &str, cfg: &HeuristicConfig) -> RuleVerdict {
    let words = m.word_count as f64;
    match rule {
        RuleId::R1 => {
            let failed = m.most_common_char.is_some_and(|(c, _)| !c.is_alphabetic());
            let count = m.most_common_char.map_or(0.0, |(_, n)| n as f64);
            verdict(rule, failed, &[("most_common_char_count", count)])
        }
        RuleId::R2 => {
            let ratio = if m.digit_chars == 0 { f64::INFINITY } else { m.letter_chars as f64 / m.digit_chars as f64 };
            verdict(
                rule,
                ratio < cfg.min_letter_digit_ratio,
                &[("letter_chars", m.letter_chars as f64), ("digit_chars", m.digit_chars as f64), ("letter_digit_ratio", ratio)],
            )
        }
        RuleId::R3 => {
            let limit = if m.word_count <= cfg.short_doc_words {
                cfg.max_top_word_fraction_short
            } else {
                cfg.max_top_word_fraction
            };
            verdict(rule, m.top_word_fraction > limit, &[("top_word_fraction", m.top_word_fraction)])
        }
        RuleId::R4 => verdict(
            rule,
            m.word_count < cfg.min_words || m.word_count > cfg.max_words,
            &[("word_count", words)],
        ),
        RuleId::R5 => verdict(
            rule,
            m.words_with_letter_fraction < cfg.min_alpha_word_fraction,
            &[("words_with_letter_fraction", m.words_with_letter_fraction)],
        ),
        RuleId::R6 => verdict(rule, m.stopword_count < cfg.min_stop_words, &[("stopword_count", m.stopword_count as f64)]),
        RuleId::R7 => verdict(
            rule,
            m.mean_word_length < cfg.min_mean_word_length || m.mean_word_length > cfg.max_mean_word_length,
            &[("mean_word_length", m.mean_word_length)],
        ),
        RuleId::R8 => verdict(
            rule,
            m.line_count < cfg.min_lines || m.third_longest_line_len < cfg.min_third_longest_line,
            &[("line_count", m.line_count as f64), ("third_longest_line_len", m.third_longest_line_len as f64)],
        ),
        RuleId::R9 => {
            let mut failed =
                m.dup_line_fraction > cfg.max_dup_line_fraction || m.dup_para_fraction > cfg.max_dup_para_fraction;
            let mut values = vec![
                ("dup_line_fraction".to_string(), m.dup_line_fraction),
                ("dup_para_fraction".to_string(), m.dup_para_fraction),
            ];
            for (n, limit) in (2..=4).zip(cfg.max_top_ngram_fraction) {
                let v = m.ngram_fractions.get(&n).copied().unwrap_or(0.0);
                failed |= v > limit;
                values.push((format!("top_{n}gram_fraction"), v));
            }
            for (n, limit) in (5..=10).zip(cfg.max_dup_ngram_fraction) {
                let v = m.ngram_fractions.get(&n).copied().unwrap_or(0.0);
                failed |= v > limit;
                values.push((format!("dup_{n}gram_fraction"), v));
            }
            RuleVerdict { rule, failed, values }
        }
        RuleId::R10 => {
            let ratio = match cfg.symbol_ratio_mode {
                SymbolRatioMode::Symbols => m.symbol_to_word_ratio,
                SymbolRatioMode::Characters if m.word_count > 0 => m.char_count as f64 / words,
                SymbolRatioMode::Characters => 0.0,
            };
            verdict(rule, ratio > cfg.max_symbol_word_ratio, &[("symbol_to_word_ratio", ratio)])
        }
        RuleId::R11 => {
            let only_separators = text.chars().all(|c| matches!(c, '\r' | '\n' | '\t' | ' ') || c.is_whitespace());
            verdict(rule, only_separators, &[])
        }
        RuleId::R12 => {
            let spaces = longest_run(text, ' ');
            let newlines = longest_run(text, '\n');
            verdict(
                rule,
                spaces >= cfg.max_space_run || newlines >= cfg.max_newline_run,
                &[("longest_space_run", spaces as f64), ("longest_newline_run", newlines as f64)],
            )
        }
        RuleId::R13 => verdict(
            rule,
            m.newline_fraction > cfg.max_newline_fraction,
            &[("newline_fraction", m.newline_fraction)],
        ),
        RuleId::R14 => {
            let bad = text.chars().filter(|&c| c == '\u{FFFD}' || is_c1_control(c)).count();
            verdict(rule, bad > 0, &[("decoding_error_chars", bad as f64)])
        }
        RuleId::R15 => verdict(rule, m.max_word_len > cfg.max_word_length, &[("max_word_len", m.max_word_len as f64)]),
        RuleId::R16 => verdict(
            rule,
            m.max_sentence_words > cfg.max_sentence_words,
            &[("max_sentence_words", m.max_sentence_words as f64)],
        ),
        RuleId::R17 => {
            let colon = text.trim_end().ends_with(':');
            verdict(rule, colon, &[])
        }
        RuleId::R18 => {
            let image = text.split_whitespace().any(|w| is_image_url(w, &cfg.image_extensions));
            let mut tokens = text.split_whitespace();
            let url_only = matches!((tokens.next(), tokens.next()), (Some(w), None) if is_url(strip_url_punct(w)));
            verdict(rule, image || url_only, &[])
        }
    }
}

/// Runs R1..R18 in order. The first failing rule becomes the outcome's
/// `rule_id`; diagnostics carry the compared values of every rule.
pub fn apply_drop_rules(metrics: &DocMetrics, text: &str, cfg: &HeuristicConfig) -> FilterOutcome {
    let verdicts = evaluate_rules(metrics, text, cfg);
    let mut outcome = match verdicts.iter().find(|v| v.failed) {
        Some(v) => FilterOutcome::drop(v.rule.to_string()),
        None => FilterOutcome::keep(),
    };
    for v in &verdicts {
        for (name, value) in &v.values {
            outcome.set_diagnostic(name.clone(), *value);
        }
    }
    outcome
}
