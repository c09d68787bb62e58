//! Corpus statistics and reports: per-document stat vectors and histograms,
//! score exceedance curves and their area, quality-signal ratios, stage
//! retention and per-year volumes.

mod curve;
mod retention;
mod signals;

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::corpus::Document;
use crate::text::{self, Tokenizer};

pub use curve::{auc, default_grid, exceedance_curve, CurveError, ScoreCurve};
pub use retention::{
    dump_year, dump_year_volumes, retention_report, stratified_sample, RetentionError, RetentionReport, RetentionRow,
    YearVolume,
};
pub use signals::{quality_signals, SampledCounts, SignalConfig, SignalValue, QualitySignalReport};

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct DocStatVector {
    pub content_length: usize,
    pub line_number: usize,
    pub token_length: usize,
    pub non_alpha_fraction: f64,
    pub unique_words_fraction: f64,
    pub mean_word_length: f64,
    pub sentence_number: usize,
    pub stop_word_fraction: f64,
    pub symbol_to_word_ratio: f64,
}

impl DocStatVector {
    pub const FIELDS: [&'static str; 9] = [
        "content_length",
        "line_number",
        "token_length",
        "non_alpha_fraction",
        "unique_words_fraction",
        "mean_word_length",
        "sentence_number",
        "stop_word_fraction",
        "symbol_to_word_ratio",
    ];

    pub fn get(&self, field: &str) -> Option<f64> {
        Some(match field {
            "content_length" => self.content_length as f64,
            "line_number" => self.line_number as f64,
            "token_length" => self.token_length as f64,
            "non_alpha_fraction" => self.non_alpha_fraction,
            "unique_words_fraction" => self.unique_words_fraction,
            "mean_word_length" => self.mean_word_length,
            "sentence_number" => self.sentence_number as f64,
            "stop_word_fraction" => self.stop_word_fraction,
            "symbol_to_word_ratio" => self.symbol_to_word_ratio,
            _ => return None,
        })
    }

    /// Fractions are bounded; the other metrics are long-tailed.
    pub fn is_fraction(field: &str) -> bool {
        field.ends_with("_fraction")
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

/// Per-document statistics. Words, sentences, stop words and symbols use the
/// same definitions as the heuristic filter.
pub fn doc_stats(text: &str, tokenizer: &dyn Tokenizer) -> DocStatVector {
    let chars = text.chars().count();
    let words: Vec<&str> = text::words(text).collect();
    let distinct: HashSet<&str> = words.iter().copied().collect();
    let word_chars: usize = words.iter().map(|w| w.chars().count()).sum();
    DocStatVector {
        content_length: chars,
        line_number: text.lines().count(),
        token_length: tokenizer.count_tokens(text),
        non_alpha_fraction: ratio(text.chars().filter(|c| !c.is_alphabetic()).count(), chars),
        unique_words_fraction: ratio(distinct.len(), words.len()),
        mean_word_length: ratio(word_chars, words.len()),
        sentence_number: text::sentences(text).len(),
        stop_word_fraction: ratio(words.iter().filter(|w| text::is_stop_word(w)).count(), words.len()),
        symbol_to_word_ratio: ratio(text::symbol_count(text), words.len()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistogramSpec {
    pub bins: usize,
    /// Values above this quantile (nearest rank) are reported as out of range.
    pub truncate_quantile: Option<f64>,
}

impl HistogramSpec {
    pub fn new(bins: usize) -> Self {
        HistogramSpec { bins, truncate_quantile: None }
    }

    pub fn truncated(bins: usize, quantile: f64) -> Self {
        HistogramSpec { bins, truncate_quantile: Some(quantile) }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    /// `bins + 1` ascending edges; the last bin includes its upper edge.
    pub edges: Vec<f64>,
    /// Percent of in-range values per bin; sums to 100.
    pub percentages: Vec<f64>,
    pub in_range: usize,
    pub out_of_range: usize,
    pub out_of_range_percent: f64,
}

/// Nearest-rank quantile of sorted data.
fn nearest_rank(sorted: &[f64], q: f64) -> f64 {
    let rank = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[rank - 1]
}

pub fn histogram(values: &[f64], spec: &HistogramSpec) -> Histogram {
    let mut sorted: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    if sorted.is_empty() || spec.bins == 0 {
        return Histogram::default();
    }
    sorted.sort_by(f64::total_cmp);
    let lo = sorted[0];
    let hi = match spec.truncate_quantile {
        Some(q) => nearest_rank(&sorted, q),
        None => sorted[sorted.len() - 1],
    };
    let width = (hi - lo) / spec.bins as f64;
    let edges: Vec<f64> = (0..=spec.bins).map(|i| if i == spec.bins { hi } else { lo + width * i as f64 }).collect();
    let mut counts = vec![0usize; spec.bins];
    let mut out = 0;
    for &v in &sorted {
        if v > hi {
            out += 1;
            continue;
        }
        let idx = if width > 0.0 { (((v - lo) / width) as usize).min(spec.bins - 1) } else { 0 };
        counts[idx] += 1;
    }
    let in_range = sorted.len() - out;
    Histogram {
        edges,
        percentages: counts.iter().map(|&c| 100.0 * c as f64 / in_range as f64).collect(),
        in_range,
        out_of_range: out,
        out_of_range_percent: 100.0 * out as f64 / sorted.len() as f64,
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub documents: usize,
    pub means: std::collections::BTreeMap<String, f64>,
    pub histograms: std::collections::BTreeMap<String, Histogram>,
}

/// Histograms of every stat; long-tailed metrics are truncated at p99.
pub fn stats_report(docs: &[Document], tokenizer: &dyn Tokenizer, bins: usize) -> StatsReport {
    use rayon::prelude::*;
    let vectors: Vec<DocStatVector> = docs.par_iter().map(|d| doc_stats(&d.text, tokenizer)).collect();
    let mut report = StatsReport { documents: docs.len(), ..Default::default() };
    for field in DocStatVector::FIELDS {
        let values: Vec<f64> = vectors.iter().map(|v| v.get(field).expect("known field")).collect();
        let spec = if DocStatVector::is_fraction(field) {
            HistogramSpec::new(bins)
        } else {
            HistogramSpec::truncated(bins, 0.99)
        };
        let mean = if values.is_empty() { 0.0 } else { values.iter().sum::<f64>() / values.len() as f64 };
        report.means.insert(field.to_owned(), mean);
        report.histograms.insert(field.to_owned(), histogram(&values, &spec));
    }
    report
}

impl StatsReport {
    pub fn render(&self) -> String {
        let mut out = format!("documents: {}\n{:<24} {:>14}\n", self.documents, "metric", "mean");
        for (k, v) in &self.means {
            out.push_str(&format!("{k:<24} {v:>14.4}\n"));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::WhitespaceTokenizer;
    use proptest::prelude::*;

    fn stats(t: &str) -> DocStatVector {
        doc_stats(t, &WhitespaceTokenizer)
    }

    #[test]
    fn doc_stat_examples() {
        let s = stats("Hello world.");
        assert_eq!((s.content_length, s.line_number, s.sentence_number), (12, 1, 1));
        assert_eq!(stats("a a a a").unique_words_fraction, 0.25);
        assert_eq!(stats("abc123").non_alpha_fraction, 0.5);
        assert_eq!(stats(""), DocStatVector::default());
    }

    #[test]
    fn histogram_examples() {
        let h = histogram(&[1.0; 4], &HistogramSpec::new(1));
        assert_eq!(h.percentages, vec![100.0]);
        let uniform: Vec<f64> = (0..100).map(f64::from).collect();
        let h = histogram(&uniform, &HistogramSpec::new(10));
        assert_eq!(h.percentages, vec![10.0; 10]);
        assert!(histogram(&[], &HistogramSpec::new(10)).percentages.is_empty());
    }

    #[test]
    fn p99_truncation_reports_tail_mass() {
        let mut values: Vec<f64> = (1..=99).map(f64::from).collect();
        values.push(1e9);
        let h = histogram(&values, &HistogramSpec::truncated(10, 0.99));
        assert_eq!(h.out_of_range, 1);
        assert_eq!(h.out_of_range_percent, 1.0);
        assert!((h.percentages.iter().sum::<f64>() - 100.0).abs() < 1e-9);
    }

    proptest! {
        #[test]
        fn duplication_algebra(words in prop::collection::vec("(the|and|cat|dog|x|runs|of|Sun)", 1..60)) {
            let x = words.join(" ");
            let xx = format!("{x} {x}");
            let (a, b) = (stats(&x), stats(&xx));
            prop_assert!((b.unique_words_fraction - a.unique_words_fraction / 2.0).abs() < 1e-12);
            prop_assert!((b.stop_word_fraction - a.stop_word_fraction).abs() < 1e-12);
            prop_assert!((b.mean_word_length - a.mean_word_length).abs() < 1e-12);
        }
    }
}
