//! Advertisement and fluency scoring, and token-budgeted selection of the
//! high-quality subset.

use std::collections::BTreeMap;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Document, FilterOutcome, Stage};
use crate::safety::{LexiconScorer, ScoreReply, Scorer, ScorerError};
use crate::text::{self, Tokenizer};

pub const FLUENCY_DIMENSIONS: [&str; 4] = ["consistency", "noisy", "information", "grammar"];
pub const DEFAULT_AD_THRESHOLD: f64 = 0.5;
pub const FLUENCY_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct QualityAnnotations {
    pub ad_score: Option<f64>,
    pub fluency_score: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fluency_dims: Option<BTreeMap<String, f64>>,
    #[serde(default)]
    pub selected: bool,
}

#[derive(Debug, Error)]
pub enum QualityError {
    #[error("missing fluency dimension {0:?}")]
    MissingDimension(String),
    #[error("fluency dimension {0:?} = {1} outside [0, 1]")]
    DimensionRange(String, f64),
    #[error("fluency weights must be non-negative with a positive sum")]
    InvalidWeights,
    #[error(transparent)]
    Scorer(#[from] ScorerError),
}

/// Per-dimension fluency weights; normalized to sum to 1 on construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawWeights", into = "RawWeights")]
pub struct FluencyWeights {
    weights: [f64; 4],
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawWeights {
    consistency: f64,
    noisy: f64,
    information: f64,
    grammar: f64,
}

impl TryFrom<RawWeights> for FluencyWeights {
    type Error = QualityError;

    fn try_from(r: RawWeights) -> Result<Self, QualityError> {
        FluencyWeights::new([r.consistency, r.noisy, r.information, r.grammar])
    }
}

impl From<FluencyWeights> for RawWeights {
    fn from(w: FluencyWeights) -> Self {
        let [consistency, noisy, information, grammar] = w.weights;
        RawWeights { consistency, noisy, information, grammar }
    }
}

impl FluencyWeights {
    /// Weights in [`FLUENCY_DIMENSIONS`] order.
    pub fn new(raw: [f64; 4]) -> Result<Self, QualityError> {
        let sum: f64 = raw.iter().sum();
        if raw.iter().any(|w| !w.is_finite() || *w < 0.0) || sum <= 0.0 {
            return Err(QualityError::InvalidWeights);
        }
        Ok(FluencyWeights { weights: raw.map(|w| w / sum) })
    }

    pub fn get(&self, dim: &str) -> Option<f64> {
        FLUENCY_DIMENSIONS.iter().position(|d| *d == dim).map(|i| self.weights[i])
    }
}

impl Default for FluencyWeights {
    fn default() -> Self {
        FluencyWeights { weights: [0.25; 4] }
    }
}

/// Weighted fluency score and whether it exceeds 0.5.
pub fn fluency_label(dims: &BTreeMap<String, f64>, weights: &FluencyWeights) -> Result<(f64, bool), QualityError> {
    let mut score = 0.0;
    for (i, name) in FLUENCY_DIMENSIONS.iter().enumerate() {
        let v = *dims.get(*name).ok_or_else(|| QualityError::MissingDimension(name.to_string()))?;
        if !(0.0..=1.0).contains(&v) {
            return Err(QualityError::DimensionRange(name.to_string(), v));
        }
        score += weights.weights[i] * v;
    }
    let score = score.clamp(0.0, 1.0);
    Ok((score, score > FLUENCY_THRESHOLD))
}

/// Ad score and whether it strictly exceeds `threshold`.
pub fn ad_label(text: &str, scorer: &dyn Scorer, threshold: f64) -> Result<(f64, bool), QualityError> {
    let score = scorer.score(text)?;
    Ok((score, score > threshold))
}

/// Deterministic heuristic stand-in for a fluency classifier, replying with
/// the four dimension scores.
#[derive(Debug, Clone, Default)]
pub struct FluencyBaseline;

impl FluencyBaseline {
    pub fn dimensions(text: &str) -> BTreeMap<String, f64> {
        let chars = text.chars().count();
        let words: Vec<String> = text::words(text).map(text::normalize_word).collect();
        let sentences = text::sentences(text);

        let lines: Vec<&str> = text.lines().map(str::trim).filter(|l| !l.is_empty()).collect();
        let distinct_lines = lines.iter().collect::<std::collections::HashSet<_>>().len();
        let consistency = if lines.is_empty() { 0.0 } else { distinct_lines as f64 / lines.len() as f64 };

        let noise_chars = text
            .chars()
            .filter(|c| !c.is_alphanumeric() && !c.is_whitespace() && !text::is_punctuation(*c))
            .count();
        let noisy = if chars == 0 { 0.0 } else { (1.0 - 5.0 * noise_chars as f64 / chars as f64).max(0.0) };

        let distinct_words = words.iter().filter(|w| !w.is_empty()).collect::<std::collections::HashSet<_>>().len();
        let information = (distinct_words as f64 / 50.0).min(1.0);

        let well_formed = sentences
            .iter()
            .filter(|s| {
                let s = s.trim();
                s.chars().next().is_some_and(char::is_uppercase) && s.ends_with(['.', '!', '?'])
            })
            .count();
        let grammar = if sentences.is_empty() { 0.0 } else { well_formed as f64 / sentences.len() as f64 };

        FLUENCY_DIMENSIONS.iter().map(|d| d.to_string()).zip([consistency, noisy, information, grammar]).collect()
    }
}

impl Scorer for FluencyBaseline {
    fn name(&self) -> &str {
        "fluency-baseline"
    }

    fn score_reply(&self, text: &str) -> Result<ScoreReply, ScorerError> {
        Ok(ScoreReply::Dimensions(Self::dimensions(text)))
    }
}

pub struct QualityScorers {
    pub ad: Arc<dyn Scorer>,
    pub fluency: Arc<dyn Scorer>,
    pub weights: FluencyWeights,
}

impl Default for QualityScorers {
    fn default() -> Self {
        QualityScorers {
            ad: Arc::new(LexiconScorer::ad_baseline()),
            fluency: Arc::new(FluencyBaseline),
            weights: FluencyWeights::default(),
        }
    }
}

impl QualityScorers {
    /// Scores one text. A fluency scorer may reply with one score or with the
    /// four dimensions, which are then combined with the configured weights.
    pub fn annotate(&self, text: &str) -> (QualityAnnotations, Vec<QualityError>) {
        let mut errors = Vec::new();
        let mut ann = QualityAnnotations::default();
        match self.ad.score(text) {
            Ok(s) => ann.ad_score = Some(s),
            Err(e) => errors.push(e.into()),
        }
        let fluency = self.fluency.score_reply(text).map_err(QualityError::from).and_then(|reply| match reply {
            ScoreReply::Dimensions(dims) => {
                let (score, _) = fluency_label(&dims, &self.weights)?;
                Ok((score, Some(dims)))
            }
            single => {
                let v = single.as_single().expect("single reply");
                Ok((crate::safety::check_fraction(self.fluency.name(), v)?, None))
            }
        });
        match fluency {
            Ok((score, dims)) => {
                ann.fluency_score = Some(score);
                ann.fluency_dims = dims;
            }
            Err(e) => errors.push(e),
        }
        (ann, errors)
    }
}

/// Scores documents in parallel, attaching annotations. Returns the number of
/// scorer failures.
pub fn score_documents(docs: &mut [Document], scorers: &QualityScorers) -> usize {
    docs.par_iter_mut()
        .map(|d| {
            let (ann, errors) = scorers.annotate(&d.text);
            for e in &errors {
                log::warn!("{}: {e}", d.id);
            }
            d.quality = Some(ann);
            errors.len()
        })
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectionConfig {
    pub w_flu: f64,
    pub w_ad: f64,
    /// Optional pre-gate: keep only docs whose fluency exceeds this.
    pub min_fluency: Option<f64>,
    /// Optional pre-gate: keep only docs whose ad score does not exceed this.
    pub max_ad: Option<f64>,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        SelectionConfig { w_flu: 0.5, w_ad: 0.5, min_fluency: None, max_ad: None }
    }
}

impl SelectionConfig {
    pub fn combined(&self, fluency: f64, ad: f64) -> f64 {
        self.w_flu * fluency + self.w_ad * (1.0 - ad)
    }
}

#[derive(Debug, Default)]
pub struct Selection {
    /// In rank order.
    pub selected: Vec<Document>,
    pub rejected: Vec<Document>,
    pub selected_tokens: u64,
    pub corpus_tokens: u64,
    pub budget_exceeds_corpus: bool,
}

/// Ranks scored documents by combined score (descending, ties by id
/// ascending) and takes the longest prefix whose token total fits the budget.
/// Unscored and pre-gated documents are rejected before ranking.
pub fn select_high_quality(
    docs: Vec<Document>,
    budget: u64,
    config: &SelectionConfig,
    tokenizer: &dyn Tokenizer,
) -> Selection {
    let mut sel = Selection::default();
    let mut ranked: Vec<(f64, u64, Document)> = Vec::new();
    for doc in docs {
        let scores = doc.quality.as_ref().and_then(|q| Some((q.fluency_score?, q.ad_score?)));
        let Some((flu, ad)) = scores else {
            sel.rejected.push(doc.into_reject(&FilterOutcome::drop("unscored")));
            continue;
        };
        if config.min_fluency.is_some_and(|m| flu <= m) || config.max_ad.is_some_and(|m| ad > m) {
            let outcome = FilterOutcome::drop("pre_gate").with_diagnostic("fluency", flu).with_diagnostic("ad", ad);
            sel.rejected.push(doc.into_reject(&outcome));
            continue;
        }
        let tokens = tokenizer.count_tokens(&doc.text) as u64;
        sel.corpus_tokens += tokens;
        ranked.push((config.combined(flu, ad), tokens, doc));
    }
    ranked.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.2.id.cmp(&b.2.id)));

    if sel.corpus_tokens <= budget {
        sel.budget_exceeds_corpus = sel.corpus_tokens < budget;
        if sel.budget_exceeds_corpus {
            log::warn!("token budget {budget} exceeds scored corpus ({} tokens); selecting all", sel.corpus_tokens);
        }
    }

    let mut open = true;
    for (combined, tokens, mut doc) in ranked {
        if open && sel.selected_tokens + tokens <= budget {
            sel.selected_tokens += tokens;
            if let Some(q) = doc.quality.as_mut() {
                q.selected = true;
            }
            doc.advance(Stage::HighQuality);
            sel.selected.push(doc);
        } else {
            open = false;
            let outcome = FilterOutcome::drop("budget").with_diagnostic("combined", combined);
            sel.rejected.push(doc.into_reject(&outcome));
        }
    }
    sel
}
