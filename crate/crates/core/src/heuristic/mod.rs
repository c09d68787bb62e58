//! Rule-based cleaning: content rewrites followed by eighteen document-drop rules.
//!
//! Rewrites run in a fixed order (character normalization, effective-line
//! trimming, line scrubbing); the drop rules then run against metrics of the
//! rewritten text. All thresholds live in [`HeuristicConfig`].

mod metrics;
mod rewrite;
mod rules;

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::FilterOutcome;

pub use metrics::{compute_metrics, compute_metrics_with, duplicate_line_fraction, DocMetrics};
pub use rewrite::{normalize_characters, scrub_lines, trim_effective_lines, LineScrubber};
pub use rules::{apply_drop_rules, evaluate_rules, RuleId, RuleVerdict};

/// How R10 computes its ratio.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SymbolRatioMode {
    /// `#`, `…` and `...` occurrences per word.
    #[default]
    Symbols,
    /// Every character per word.
    Characters,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HeuristicConfig {
    /// Phrases removed from within lines (case-insensitive).
    pub scrub_patterns: Vec<String>,
    /// A line containing any of these (case-insensitive) is deleted.
    pub line_blocklist: Vec<String>,
    pub stop_words: Vec<String>,

    pub min_letter_digit_ratio: f64,
    pub max_top_word_fraction: f64,
    pub max_top_word_fraction_short: f64,
    pub short_doc_words: usize,
    pub min_words: usize,
    pub max_words: usize,
    pub min_alpha_word_fraction: f64,
    pub min_stop_words: usize,
    pub min_mean_word_length: f64,
    pub max_mean_word_length: f64,
    pub min_lines: usize,
    pub min_third_longest_line: usize,
    pub max_dup_line_fraction: f64,
    pub max_dup_para_fraction: f64,
    /// Top n-gram character fraction limits for n = 2, 3, 4.
    pub max_top_ngram_fraction: [f64; 3],
    /// Duplicate n-gram character fraction limits for n = 5..=10.
    pub max_dup_ngram_fraction: [f64; 6],
    pub max_symbol_word_ratio: f64,
    pub symbol_ratio_mode: SymbolRatioMode,
    pub max_space_run: usize,
    pub max_newline_run: usize,
    pub max_newline_fraction: f64,
    pub max_word_length: usize,
    pub max_sentence_words: usize,
    pub image_extensions: Vec<String>,
}

impl Default for HeuristicConfig {
    fn default() -> Self {
        HeuristicConfig {
            scrub_patterns: vec!["cookie policy".into(), "use of cookies".into()],
            line_blocklist: vec!["lorem ipsum".into(), "javascript".into(), "{".into()],
            stop_words: crate::text::STOP_WORDS.iter().map(|s| s.to_string()).collect(),
            min_letter_digit_ratio: 0.46,
            max_top_word_fraction: 0.075,
            max_top_word_fraction_short: 0.30,
            short_doc_words: 500,
            min_words: 50,
            max_words: 100_000,
            min_alpha_word_fraction: 0.80,
            min_stop_words: 2,
            min_mean_word_length: 3.0,
            max_mean_word_length: 10.0,
            min_lines: 3,
            min_third_longest_line: 20,
            max_dup_line_fraction: 0.30,
            max_dup_para_fraction: 0.30,
            max_top_ngram_fraction: [0.20, 0.18, 0.16],
            max_dup_ngram_fraction: [0.15, 0.14, 0.13, 0.12, 0.11, 0.10],
            max_symbol_word_ratio: 1.2,
            symbol_ratio_mode: SymbolRatioMode::Symbols,
            max_space_run: 500,
            max_newline_run: 8,
            max_newline_fraction: 0.25,
            max_word_length: 45,
            max_sentence_words: 56,
            image_extensions: ["png", "jpg", "jpeg", "gif", "webp", "svg"].iter().map(|s| s.to_string()).collect(),
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("parsing rule config: {0}")]
    Parse(#[from] toml::de::Error),
}

impl HeuristicConfig {
    /// Parses a key/value (TOML) override file; unspecified keys keep their defaults.
    pub fn from_toml(s: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(s)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let s = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        Self::from_toml(&s)
    }
}

/// Result of cleaning one document.
#[derive(Debug, Clone)]
pub struct Cleaned {
    pub text: String,
    pub outcome: FilterOutcome,
}

/// Applies rewrites and drop rules with one configuration.
pub struct HeuristicFilter {
    config: HeuristicConfig,
    scrubber: LineScrubber,
}

impl HeuristicFilter {
    pub fn new(config: HeuristicConfig) -> Self {
        let scrubber = LineScrubber::new(&config.scrub_patterns, &config.line_blocklist);
        HeuristicFilter { config, scrubber }
    }

    pub fn config(&self) -> &HeuristicConfig {
        &self.config
    }

    pub fn rewrite(&self, text: &str) -> String {
        let text = normalize_characters(text);
        let text = trim_effective_lines(&text);
        self.scrubber.scrub(&text)
    }

    pub fn clean(&self, text: &str) -> Cleaned {
        let text = self.rewrite(text);
        let metrics = compute_metrics_with(&text, &self.config.stop_words);
        let outcome = apply_drop_rules(&metrics, &text, &self.config);
        Cleaned { text, outcome }
    }
}

impl Default for HeuristicFilter {
    fn default() -> Self {
        HeuristicFilter::new(HeuristicConfig::default())
    }
}
