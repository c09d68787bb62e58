//! Corpus-health ratios. Machine-computed signals are `A / B` over the whole
//! corpus; sampled signals are `A' / B'` read from a human-annotation file.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::corpus::Document;
use crate::heuristic::duplicate_line_fraction;
use crate::safety::WordBlocklist;
use crate::text;

/// Rule constants for the machine-computed signals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SignalConfig {
    /// Non-printable character fraction marking a document as garbled.
    pub garbled_nonprintable_fraction: f64,
    /// Space fraction above which a document has a special-character problem.
    pub max_space_fraction: f64,
    pub max_newline_run: usize,
    /// Length of a punctuation-free run that counts as a no-punctuation block.
    pub no_punctuation_block: usize,
    /// Duplicate-line fraction above which a document counts as repetitive.
    pub in_document_duplicate_fraction: f64,
    pub anti_scraping_phrases: Vec<String>,
    pub safety_threshold: f64,
    /// Sampled metrics that must be present in the annotation file.
    pub sampled_metrics: Vec<String>,
}

impl Default for SignalConfig {
    fn default() -> Self {
        SignalConfig {
            garbled_nonprintable_fraction: 0.01,
            max_space_fraction: 0.3,
            max_newline_run: 8,
            no_punctuation_block: 256,
            in_document_duplicate_fraction: 0.30,
            anti_scraping_phrases: [
                "captcha",
                "verify you are human",
                "are you a robot",
                "robot check",
                "unusual traffic",
                "access denied",
                "please enable javascript",
                "enable cookies to continue",
            ]
            .iter()
            .map(|s| s.to_string())
            .collect(),
            safety_threshold: 0.2,
            sampled_metrics: vec!["relevance.relevance".into(), "fluency.human_fluency".into()],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampledCounts {
    pub a: u64,
    pub b: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "provenance", rename_all = "snake_case")]
pub enum SignalValue {
    Machine { ratio: f64, a: u64, b: u64 },
    Sampled { ratio: f64, a_prime: u64, b_prime: u64 },
    Unavailable { reason: String },
}

impl SignalValue {
    fn machine(a: u64, b: u64) -> Self {
        SignalValue::Machine { ratio: if b == 0 { 0.0 } else { a as f64 / b as f64 }, a, b }
    }

    fn sampled(c: SampledCounts) -> Self {
        let ratio = if c.b == 0 { 0.0 } else { c.a as f64 / c.b as f64 };
        SignalValue::Sampled { ratio, a_prime: c.a, b_prime: c.b }
    }

    pub fn ratio(&self) -> Option<f64> {
        match self {
            SignalValue::Machine { ratio, .. } | SignalValue::Sampled { ratio, .. } => Some(*ratio),
            SignalValue::Unavailable { .. } => None,
        }
    }
}

/// family -> metric -> value
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct QualitySignalReport {
    pub documents: u64,
    pub families: BTreeMap<String, BTreeMap<String, SignalValue>>,
}

impl QualitySignalReport {
    pub fn get(&self, family: &str, metric: &str) -> Option<&SignalValue> {
        self.families.get(family)?.get(metric)
    }

    fn set(&mut self, family: &str, metric: &str, value: SignalValue) {
        self.families.entry(family.to_owned()).or_default().insert(metric.to_owned(), value);
    }

    /// Reads sampled counts: a JSON object mapping `family.metric` to `{"a": .., "b": ..}`.
    pub fn load_annotations(path: impl AsRef<Path>) -> std::io::Result<BTreeMap<String, SampledCounts>> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
    }

    pub fn render(&self) -> String {
        let mut out = format!("documents: {}\n", self.documents);
        for (family, metrics) in &self.families {
            for (metric, v) in metrics {
                let cell = match v {
                    SignalValue::Machine { ratio, a, b } => format!("{ratio:.4}  ({a}/{b}, machine)"),
                    SignalValue::Sampled { ratio, a_prime, b_prime } => {
                        format!("{ratio:.4}  ({a_prime}/{b_prime}, sampled)")
                    }
                    SignalValue::Unavailable { reason } => format!("unavailable ({reason})"),
                };
                out.push_str(&format!("{family:<18} {metric:<24} {cell}\n"));
            }
        }
        out
    }
}

fn is_garbled(text: &str, max_fraction: f64) -> bool {
    if text.contains('\u{FFFD}') {
        return true;
    }
    let total = text.chars().count();
    let bad = text.chars().filter(|&c| c.is_control() && !matches!(c, '\n' | '\t' | '\r')).count();
    total > 0 && bad as f64 / total as f64 >= max_fraction
}

fn unbalanced(text: &str) -> bool {
    for (open, close) in [('(', ')'), ('[', ']'), ('{', '}')] {
        let mut depth: i64 = 0;
        for c in text.chars() {
            if c == open {
                depth += 1;
            } else if c == close {
                depth -= 1;
                if depth < 0 {
                    return true;
                }
            }
        }
        if depth != 0 {
            return true;
        }
    }
    text.chars().filter(|&c| c == '"').count() % 2 == 1
}

fn has_special_characters(text: &str, cfg: &SignalConfig) -> bool {
    let total = text.chars().count();
    let spaces = text.chars().filter(|&c| c == ' ').count();
    if total > 0 && spaces as f64 / total as f64 > cfg.max_space_fraction {
        return true;
    }
    if text.chars().any(|c| c == '#' || text::is_invisible(c)) {
        return true;
    }
    let mut run = 0;
    for c in text.chars() {
        run = if c == '\n' { run + 1 } else { 0 };
        if run >= cfg.max_newline_run {
            return true;
        }
    }
    false
}

fn has_unpunctuated_block(text: &str, block: usize) -> bool {
    let mut run = 0;
    for c in text.chars() {
        run = if text::is_punctuation(c) { 0 } else { run + 1 };
        if run >= block {
            return true;
        }
    }
    false
}

/// Computes every machine signal and merges the sampled ones from
/// `annotations`. Sampled metrics listed in the config but absent (or with
/// no annotation file at all) are reported as unavailable.
pub fn quality_signals(
    docs: &[Document],
    annotations: Option<&BTreeMap<String, SampledCounts>>,
    cfg: &SignalConfig,
) -> QualitySignalReport {
    let markup = Regex::new(r"</?[A-Za-z][A-Za-z0-9]*(?:\s[^<>]*)?/?>|&(?:[A-Za-z]{2,8}|#[0-9]{1,6});")
        .expect("markup pattern");
    let scraping = WordBlocklist::new(&cfg.anti_scraping_phrases);
    let n = docs.len() as u64;
    let count = |pred: &dyn Fn(&Document) -> bool| docs.iter().filter(|d| pred(d)).count() as u64;

    let mut r = QualitySignalReport { documents: n, ..Default::default() };
    r.set("effectiveness", "empty_text", SignalValue::machine(count(&|d| d.text.trim().is_empty()), n));
    r.set(
        "effectiveness",
        "garbled",
        SignalValue::machine(count(&|d| is_garbled(&d.text, cfg.garbled_nonprintable_fraction)), n),
    );
    r.set("completeness", "ends_with_colon", SignalValue::machine(count(&|d| d.text.trim_end().ends_with(':')), n));
    r.set("completeness", "unbalanced_pairs", SignalValue::machine(count(&|d| unbalanced(&d.text)), n));
    r.set("understandability", "format_error", SignalValue::machine(count(&|d| markup.is_match(&d.text)), n));
    r.set(
        "understandability",
        "special_characters",
        SignalValue::machine(count(&|d| has_special_characters(&d.text, cfg)), n),
    );
    r.set(
        "similarity",
        "in_document_duplicates",
        SignalValue::machine(
            count(&|d| duplicate_line_fraction(&d.text) > cfg.in_document_duplicate_fraction),
            n,
        ),
    );
    let distinct: HashSet<&str> = docs.iter().map(|d| d.text.as_str()).collect();
    r.set("similarity", "duplicate_items", SignalValue::machine(n - distinct.len() as u64, n));
    r.set(
        "fluency",
        "no_punctuation_block",
        SignalValue::machine(count(&|d| has_unpunctuated_block(&d.text, cfg.no_punctuation_block)), n),
    );
    r.set("fluency", "anti_scraping", SignalValue::machine(count(&|d| !scraping.find_all(&d.text).is_empty()), n));

    let scored = docs.iter().any(|d| d.safety.as_ref().is_some_and(|s| s.toxicity.is_some() || s.pornography.is_some()));
    if scored {
        let t = cfg.safety_threshold;
        let above = |f: fn(&crate::safety::SafetyAnnotations) -> Option<f64>| {
            count(&|d| d.safety.as_ref().and_then(f).is_some_and(|v| v > t))
        };
        r.set("security", "pornography", SignalValue::machine(above(|s| s.pornography), n));
        r.set("security", "toxicity", SignalValue::machine(above(|s| s.toxicity), n));
    } else {
        for m in ["pornography", "toxicity"] {
            r.set("security", m, SignalValue::Unavailable { reason: "no safety scores in input".into() });
        }
    }

    for key in &cfg.sampled_metrics {
        let (family, metric) = key.split_once('.').unwrap_or((key.as_str(), key.as_str()));
        let value = match annotations.and_then(|a| a.get(key)) {
            Some(&c) => SignalValue::sampled(c),
            None if annotations.is_none() => SignalValue::Unavailable { reason: "no annotation file".into() },
            None => SignalValue::Unavailable { reason: "not in annotation file".into() },
        };
        r.set(family, metric, value);
    }
    if let Some(a) = annotations {
        for (key, &c) in a {
            if let Some((family, metric)) = key.split_once('.') {
                r.set(family, metric, SignalValue::sampled(c));
            }
        }
    }
    r
}
