//! Safety gate: domain and word blocklists, toxicity and pornography
//! scorers, and PII masking of surviving documents.

mod blocklist;
mod pii;
mod scorer;

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::corpus::{Document, FilterOutcome, Stage};

pub use blocklist::{match_blockwords, match_domain, read_list, BlockwordHit, DomainBlocklist, UnparseableUrl, WordBlocklist};
pub use pii::{
    default_spec as default_pii_spec, mask_pii, mask_token, Guard, PiiConfigError, PiiRegistry, PiiRegistrySpec,
    PiiSpan, PiiTypeSpec,
};
pub use scorer::{apply_scorer, check_fraction, CommandScorer, FnScorer, LexiconScorer, ScoreOutcome, ScoreReply, Scorer, ScorerError};

pub const DEFAULT_TOXICITY_THRESHOLD: f64 = 0.2;
pub const DEFAULT_PORNOGRAPHY_THRESHOLD: f64 = 0.2;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SafetyAnnotations {
    pub domain_blocked: bool,
    #[serde(default)]
    pub blockword_hits: Vec<BlockwordHit>,
    pub toxicity: Option<f64>,
    pub pornography: Option<f64>,
    #[serde(default)]
    pub pii_spans: Vec<PiiSpan>,
    pub discard: bool,
    /// Checks that voted to discard, in evaluation order.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub reasons: Vec<String>,
}

/// Names of the discard checks, in evaluation order.
pub const CHECKS: [&str; 4] = ["domain", "blockword", "toxicity", "pornography"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SafetyThresholds {
    pub toxicity: f64,
    pub pornography: f64,
    /// Treat scorer failures as flagged.
    pub fail_closed: bool,
}

impl Default for SafetyThresholds {
    fn default() -> Self {
        SafetyThresholds {
            toxicity: DEFAULT_TOXICITY_THRESHOLD,
            pornography: DEFAULT_PORNOGRAPHY_THRESHOLD,
            fail_closed: false,
        }
    }
}

pub struct SafetyGate {
    pub domains: DomainBlocklist,
    pub words: WordBlocklist,
    pub toxicity: Arc<dyn Scorer>,
    pub pornography: Arc<dyn Scorer>,
    pub pii: PiiRegistry,
    pub thresholds: SafetyThresholds,
}

impl Default for SafetyGate {
    fn default() -> Self {
        SafetyGate {
            domains: DomainBlocklist::default(),
            words: WordBlocklist::new(Vec::<String>::new()),
            toxicity: Arc::new(LexiconScorer::toxicity_baseline()),
            pornography: Arc::new(LexiconScorer::pornography_baseline()),
            pii: PiiRegistry::default(),
            thresholds: SafetyThresholds::default(),
        }
    }
}

/// Per-document counters feeding a [`SafetyReport`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GateEvents {
    pub flagged: [bool; 4],
    pub unparseable_url: bool,
    pub toxicity_failed: bool,
    pub pornography_failed: bool,
    pub pii_spans: usize,
}

#[derive(Debug)]
pub struct GateResult {
    pub doc: Document,
    pub outcome: FilterOutcome,
    pub events: GateEvents,
}

impl SafetyGate {
    /// Runs every check on the unmasked text; the discard decision is the
    /// disjunction of the checks, so it does not depend on their order.
    /// Survivors are PII-masked and advanced to the safe stage. The outcome
    /// names the first check that voted to discard.
    pub fn gate(&self, mut doc: Document) -> GateResult {
        let mut events = GateEvents::default();
        let mut ann = SafetyAnnotations::default();

        if let Some(url) = &doc.url {
            match self.domains.matches_url(url) {
                Ok(hit) => ann.domain_blocked = hit,
                Err(UnparseableUrl) => events.unparseable_url = true,
            }
        }
        ann.blockword_hits = self.words.find_all(&doc.text);

        let tox = apply_scorer(&doc.text, self.toxicity.as_ref(), self.thresholds.toxicity, self.thresholds.fail_closed);
        let porn =
            apply_scorer(&doc.text, self.pornography.as_ref(), self.thresholds.pornography, self.thresholds.fail_closed);
        ann.toxicity = tox.score;
        ann.pornography = porn.score;
        events.toxicity_failed = tox.failed;
        events.pornography_failed = porn.failed;

        events.flagged = [ann.domain_blocked, !ann.blockword_hits.is_empty(), tox.flagged, porn.flagged];
        ann.reasons = CHECKS.iter().zip(events.flagged).filter(|(_, f)| *f).map(|(c, _)| c.to_string()).collect();
        ann.discard = !ann.reasons.is_empty();

        let outcome = match ann.reasons.first() {
            Some(reason) => {
                let mut o = FilterOutcome::drop(reason.clone());
                o.set_diagnostic("blockword_hits", ann.blockword_hits.len() as f64);
                if let Some(t) = ann.toxicity {
                    o.set_diagnostic("toxicity", t);
                }
                if let Some(p) = ann.pornography {
                    o.set_diagnostic("pornography", p);
                }
                o
            }
            None => {
                let (masked, spans) = self.pii.mask(&doc.text);
                doc.text = masked;
                ann.pii_spans = spans;
                events.pii_spans = ann.pii_spans.len();
                doc.advance(Stage::Safe);
                FilterOutcome::keep()
            }
        };
        doc.safety = Some(ann);
        GateResult { doc, outcome, events }
    }
}

/// Per-run safety accounting. Each check's flagged count is independent of
/// the others, so a document can count under several checks.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SafetyReport {
    pub documents: u64,
    pub flagged: BTreeMap<String, u64>,
    pub discarded: u64,
    pub kept: u64,
    pub docs_with_pii: u64,
    pub pii_spans: u64,
    pub unparseable_urls: u64,
    pub scorer_failures: BTreeMap<String, u64>,
    pub pattern_errors: u64,
}

impl SafetyReport {
    pub fn new(pattern_errors: usize) -> Self {
        let mut r = SafetyReport { pattern_errors: pattern_errors as u64, ..Default::default() };
        for c in CHECKS {
            r.flagged.insert(c.to_owned(), 0);
        }
        r.scorer_failures.insert("toxicity".into(), 0);
        r.scorer_failures.insert("pornography".into(), 0);
        r
    }

    pub fn record(&mut self, result: &GateResult) {
        let e = &result.events;
        self.documents += 1;
        for (c, f) in CHECKS.iter().zip(e.flagged) {
            if f {
                *self.flagged.entry(c.to_string()).or_default() += 1;
            }
        }
        if result.outcome.kept() {
            self.kept += 1;
        } else {
            self.discarded += 1;
        }
        if e.pii_spans > 0 {
            self.docs_with_pii += 1;
            self.pii_spans += e.pii_spans as u64;
        }
        self.unparseable_urls += e.unparseable_url as u64;
        *self.scorer_failures.entry("toxicity".into()).or_default() += e.toxicity_failed as u64;
        *self.scorer_failures.entry("pornography".into()).or_default() += e.pornography_failed as u64;
    }

    /// Fraction of documents flagged by `check`.
    pub fn fraction(&self, check: &str) -> f64 {
        if self.documents == 0 {
            return 0.0;
        }
        self.flagged.get(check).copied().unwrap_or(0) as f64 / self.documents as f64
    }
}

/// Gates a batch in parallel, returning kept docs, rejected docs (with their
/// outcome attached), and the report. Output order follows input order.
pub fn safety_gate_all(gate: &SafetyGate, docs: Vec<Document>) -> (Vec<Document>, Vec<Document>, SafetyReport) {
    use rayon::prelude::*;
    let results: Vec<GateResult> = docs.into_par_iter().map(|d| gate.gate(d)).collect();
    let mut report = SafetyReport::new(gate.pii.pattern_errors().len());
    let (mut kept, mut rejected) = (Vec::new(), Vec::new());
    for r in results {
        report.record(&r);
        if r.outcome.kept() {
            kept.push(r.doc);
        } else {
            rejected.push(r.doc.into_reject(&r.outcome));
        }
    }
    (kept, rejected, report)
}
