//! Stage transforms. Each takes a batch of documents and returns the kept
//! documents and the rejected ones (with their outcome attached), preserving
//! input order within each output.

use std::collections::HashMap;
use std::sync::Arc;

use chrono::Datelike;
use rayon::prelude::*;

use crate::corpus::{Document, FilterOutcome, Stage};
use crate::extract::{decode_html, DensityExtractor, TextExtractor};
use crate::heuristic::HeuristicFilter;
use crate::langid::LanguageDetector;
use crate::minhash::{dedup, optimal_bands, BandingPlan, DedupEntry, DupCluster, MinHashError, MinHashSignature, MinHasher};
use crate::quality::{score_documents, select_high_quality, QualityScorers, Selection, SelectionConfig};
use crate::safety::{safety_gate_all, SafetyGate, SafetyReport};
use crate::text::Tokenizer;
use crate::warc::{WarcError, WarcRecord, WarcType};

use super::config::{DedupConfig, ExtractConfig};

pub type Split = (Vec<Document>, Vec<Document>);

/// Dump label for a crawl date: ISO year and week, zero-padded.
pub fn dump_label(date: chrono::DateTime<chrono::Utc>) -> String {
    let week = date.iso_week();
    format!("{:04}-{:02}", week.year(), week.week())
}

fn record_id(rec: &WarcRecord, index: usize) -> String {
    match &rec.record_id {
        Some(id) => id.trim_start_matches('<').trim_end_matches('>').to_owned(),
        None => format!("{}#{index}", rec.target_uri),
    }
}

#[derive(Debug, Default)]
pub struct ExtractOutput {
    pub kept: Vec<Document>,
    pub rejected: Vec<Document>,
    /// Response records seen; each becomes exactly one kept or rejected document.
    pub responses: usize,
    pub response_bytes: u64,
    pub read_errors: Vec<String>,
}

/// Turns response records into raw documents: HTML 200 responses are
/// decoded and extracted, then gated on language.
pub fn extract_records(
    records: impl IntoIterator<Item = Result<WarcRecord, WarcError>>,
    cfg: &ExtractConfig,
) -> ExtractOutput {
    let mut out = ExtractOutput::default();
    let mut responses = Vec::new();
    for item in records {
        match item {
            Ok(rec) if rec.warc_type == WarcType::Response => {
                out.response_bytes += rec.body.len() as u64;
                responses.push(rec);
            }
            Ok(_) => {}
            Err(e) => out.read_errors.push(e.to_string()),
        }
    }
    out.responses = responses.len();
    let extractor = DensityExtractor::new(cfg.density_threshold);
    let detector = LanguageDetector::builtin();
    let results: Vec<(Document, FilterOutcome)> = responses
        .par_iter()
        .enumerate()
        .map(|(i, rec)| {
            let dump = cfg
                .dump_id
                .clone()
                .or_else(|| rec.warc_date.map(dump_label))
                .unwrap_or_else(|| "unknown".into());
            let mut doc = Document::new(record_id(rec, i), dump, "").with_url(rec.target_uri.clone());
            doc.fetched_at = rec.warc_date;
            if rec.http_status != 200 {
                let o = FilterOutcome::drop("http_status").with_diagnostic("status", rec.http_status as f64);
                return (doc, o);
            }
            if !rec.is_html_response() {
                return (doc, FilterOutcome::drop("not_html"));
            }
            let http = rec.http().expect("html response parses");
            let html = decode_html(http.payload, http.header("content-type"));
            doc.text = extractor.extract(&html);
            if doc.text.trim().is_empty() {
                return (doc, FilterOutcome::drop("empty_extraction"));
            }
            let verdict = detector.detect(&doc.text);
            doc.language = Some(verdict.tag.clone());
            if !cfg.languages.contains(&verdict.tag) {
                return (doc, FilterOutcome::drop("language").with_diagnostic("confidence", verdict.confidence));
            }
            (doc, FilterOutcome::keep())
        })
        .collect();
    for (doc, outcome) in results {
        if outcome.kept() {
            out.kept.push(doc);
        } else {
            out.rejected.push(doc.into_reject(&outcome));
        }
    }
    out
}

pub fn clean_documents(docs: Vec<Document>, filter: &HeuristicFilter) -> Split {
    let results: Vec<(Document, FilterOutcome)> = docs
        .into_par_iter()
        .map(|mut d| {
            let cleaned = filter.clean(&d.text);
            if cleaned.outcome.kept() {
                d.text = cleaned.text;
                d.advance(Stage::Clean);
            }
            (d, cleaned.outcome)
        })
        .collect();
    split(results)
}

fn split(results: Vec<(Document, FilterOutcome)>) -> Split {
    let (mut kept, mut rejected) = (Vec::new(), Vec::new());
    for (d, o) in results {
        if o.kept() {
            kept.push(d);
        } else {
            rejected.push(d.into_reject(&o));
        }
    }
    (kept, rejected)
}

pub fn banding_plan(cfg: &DedupConfig) -> Result<BandingPlan, MinHashError> {
    match (cfg.bands, cfg.rows) {
        (Some(b), Some(r)) => BandingPlan::new(b, r, cfg.threshold, cfg.num_perm),
        _ => Ok(optimal_bands(cfg.num_perm, cfg.threshold)),
    }
}

/// Global near-duplicate removal. Each cluster keeps its survivor; the other
/// members are rejected with a `duplicate_of` pointer.
pub fn dedup_documents(docs: Vec<Document>, cfg: &DedupConfig, seed: u64) -> Result<Split, MinHashError> {
    let hasher = MinHasher::new(cfg.num_perm, seed);
    let signatures = docs.par_iter().map(|d| hasher.signature_of_text(&d.text, cfg.shingle)).collect();
    Ok(dedup_with_signatures(docs, signatures, &banding_plan(cfg)?)?.0)
}

/// Dedup with precomputed signatures (one per document, in order). Also
/// returns every cluster, singletons included.
pub fn dedup_with_signatures(
    docs: Vec<Document>,
    signatures: Vec<MinHashSignature>,
    plan: &BandingPlan,
) -> Result<(Split, Vec<DupCluster>), MinHashError> {
    assert_eq!(docs.len(), signatures.len(), "one signature per document");
    let entries: Vec<DedupEntry> = docs
        .iter()
        .zip(signatures)
        .map(|(d, signature)| DedupEntry { id: d.id.clone(), dump_id: d.dump_id.clone(), signature })
        .collect();
    let clusters = dedup(&entries, plan)?;
    let mut survivor_of: HashMap<&str, (&str, usize)> = HashMap::new();
    for c in &clusters {
        for m in &c.member_ids {
            survivor_of.insert(m.as_str(), (c.survivor_id.as_str(), c.len()));
        }
    }
    let mut with_outcomes = Vec::with_capacity(docs.len());
    for mut d in docs {
        let (survivor, size) = survivor_of[d.id.as_str()];
        if survivor == d.id {
            d.advance(Stage::Dedup);
            with_outcomes.push((d, FilterOutcome::keep()));
        } else {
            d.extra.insert("duplicate_of".into(), serde_json::Value::String(survivor.to_owned()));
            with_outcomes.push((d, FilterOutcome::drop("duplicate").with_diagnostic("cluster_size", size as f64)));
        }
    }
    Ok((split(with_outcomes), clusters))
}

pub fn safety_documents(docs: Vec<Document>, gate: &SafetyGate) -> (Split, SafetyReport) {
    let (kept, rejected, report) = safety_gate_all(gate, docs);
    ((kept, rejected), report)
}

/// Scores every document, then selects the budgeted subset.
pub fn quality_documents(
    mut docs: Vec<Document>,
    scorers: &QualityScorers,
    budget: u64,
    selection: &SelectionConfig,
    tokenizer: &dyn Tokenizer,
) -> (Selection, usize) {
    let failures = score_documents(&mut docs, scorers);
    (select_high_quality(docs, budget, selection, tokenizer), failures)
}

/// Shared handle for scorers configured by command or baseline.
pub fn scorer_or(cmd: Option<&str>, name: &str, instances: usize, baseline: Arc<dyn crate::safety::Scorer>) -> Arc<dyn crate::safety::Scorer> {
    match cmd {
        Some(c) => Arc::new(crate::safety::CommandScorer::new(name, c, instances)),
        None => baseline,
    }
}
