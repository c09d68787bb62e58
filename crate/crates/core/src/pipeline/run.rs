use std::collections::BTreeMap;
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::corpus::{read_all, write_jsonl, write_records, Document, RecordError, Stage, StageStats};
use crate::heuristic::{HeuristicConfig, HeuristicFilter};
use crate::metrics::{
    auc, dump_year_volumes, exceedance_curve, default_grid, quality_signals, retention_report, stats_report,
    QualitySignalReport, SignalConfig,
};
use crate::quality::{FluencyBaseline, FluencyWeights, QualityScorers, SelectionConfig};
use crate::safety::{DomainBlocklist, LexiconScorer, PiiRegistry, SafetyGate, SafetyReport, SafetyThresholds, WordBlocklist};
use crate::text::{Tokenizer, WhitespaceTokenizer};
use crate::warc::{read_warc, WarcRecord, WarcType};

use super::config::{has_errors, validate_config, Diagnostic, PipelineConfig};
use super::stages::{self, Split};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid configuration: {}", .0.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("; "))]
    Config(Vec<Diagnostic>),
    #[error("stage {stage} failed: {message}")]
    Stage { stage: String, message: String },
    #[error("run interrupted after {0}")]
    Interrupted(String),
}

impl PipelineError {
    fn stage(stage: &str, e: impl ToString) -> Self {
        PipelineError::Stage { stage: stage.to_owned(), message: e.to_string() }
    }
}

/// Stops a run early, as if it were killed: after `after_shards` shard
/// checkpoints of `stage`, or once the whole stage is committed.
#[derive(Debug, Clone, PartialEq)]
pub struct Interrupt {
    pub stage: String,
    pub after_shards: Option<usize>,
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub resume: bool,
    pub shards: Option<usize>,
    pub interrupt: Option<Interrupt>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub name: String,
    pub input_digest: String,
    pub output_digest: String,
    pub rejects_digest: String,
    pub input_count: u64,
    pub output_count: u64,
    pub reject_count: u64,
    pub wall_clock_ms: u128,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    pub shards: usize,
    pub config: PipelineConfig,
    pub stages: Vec<StageRecord>,
    pub stage_stats: Vec<StageStats>,
    pub completed: bool,
    #[serde(default)]
    pub notes: BTreeMap<String, serde_json::Value>,
}

impl RunManifest {
    pub fn load(run_dir: &Path) -> Result<Self, PipelineError> {
        let text = fs::read_to_string(run_dir.join(MANIFEST)).map_err(|e| PipelineError::stage("manifest", e))?;
        serde_json::from_str(&text).map_err(|e| PipelineError::stage("manifest", e))
    }

    fn save(&self, run_dir: &Path) -> Result<(), PipelineError> {
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        let tmp = run_dir.join(format!("{MANIFEST}.partial"));
        fs::write(&tmp, text + "\n")
            .and_then(|_| fs::rename(&tmp, run_dir.join(MANIFEST)))
            .map_err(|e| PipelineError::stage("manifest", e))
    }

    pub fn stage(&self, name: &str) -> Option<&StageRecord> {
        self.stages.iter().find(|s| s.name == name)
    }

    fn upsert(&mut self, record: StageRecord) {
        self.stages.retain(|s| s.name != record.name);
        self.stages.push(record);
    }
}

pub const MANIFEST: &str = "manifest.json";

/// Output record file for each stage, named after the stage its documents reach.
pub fn output_name(stage: &str) -> &'static str {
    match stage {
        "extract" => "raw",
        "clean" => "clean",
        "dedup" => "dedup",
        "safety" => "safe",
        "quality" => "high_quality",
        _ => panic!("unknown stage {stage}"),
    }
}

fn output_stage(stage: &str) -> Stage {
    match stage {
        "extract" => Stage::Raw,
        "clean" => Stage::Clean,
        "dedup" => Stage::Dedup,
        "safety" => Stage::Safe,
        _ => Stage::HighQuality,
    }
}

pub fn stage_output_path(run_dir: &Path, stage: &str) -> PathBuf {
    run_dir.join(format!("{}.jsonl", output_name(stage)))
}

pub fn stage_rejects_path(run_dir: &Path, stage: &str) -> PathBuf {
    run_dir.join(format!("{}.rejects.jsonl", output_name(stage)))
}

pub fn file_digest(path: &Path) -> std::io::Result<String> {
    let mut f = fs::File::open(path)?;
    let mut h = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = f.read(&mut buf)?;
        if n == 0 {
            break;
        }
        h.update(&buf[..n]);
    }
    Ok(hex(&h.finalize()))
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn files_digest(paths: &[PathBuf]) -> std::io::Result<String> {
    let mut h = Sha256::new();
    for p in paths {
        h.update(file_digest(p)?.as_bytes());
        h.update(b"\n");
    }
    Ok(hex(&h.finalize()))
}

/// Default run id: a digest of the effective configuration.
pub fn default_run_id(cfg: &PipelineConfig) -> String {
    let digest = Sha256::digest(cfg.to_toml().as_bytes());
    format!("run-{}", &hex(&digest)[..12])
}

fn shard_bounds(n: usize, shards: usize) -> Vec<(usize, usize)> {
    (0..shards).map(|k| (k * n / shards, (k + 1) * n / shards)).collect()
}

struct Runner<'a> {
    cfg: &'a PipelineConfig,
    run_dir: PathBuf,
    shards: usize,
    interrupt: Option<&'a Interrupt>,
    manifest: RunManifest,
    tokenizer: WhitespaceTokenizer,
}

impl Runner<'_> {
    fn interrupted(&self, stage: &str, shards_done: Option<usize>) -> bool {
        self.interrupt.is_some_and(|i| i.stage == stage && i.after_shards == shards_done)
    }

    /// Runs a per-document transform shard by shard, checkpointing each
    /// shard (with its side value, e.g. a partial report) so a resumed run
    /// skips finished shards. Side values come back in shard order.
    fn sharded(
        &self,
        stage: &str,
        input_digest: &str,
        docs: Vec<Document>,
        f: &dyn Fn(Vec<Document>) -> Result<(Split, serde_json::Value), PipelineError>,
    ) -> Result<(Split, Vec<serde_json::Value>), PipelineError> {
        let work = self.run_dir.join("work").join(stage);
        let stamp = work.join("input.digest");
        let stamp_ok = fs::read_to_string(&stamp).is_ok_and(|s| s == format!("{input_digest} {}", self.shards));
        if !stamp_ok {
            let _ = fs::remove_dir_all(&work);
            fs::create_dir_all(&work).map_err(|e| PipelineError::stage(stage, e))?;
            fs::write(&stamp, format!("{input_digest} {}", self.shards)).map_err(|e| PipelineError::stage(stage, e))?;
        }
        let bounds = shard_bounds(docs.len(), self.shards);
        let mut docs = docs.into_iter();
        let (mut kept, mut rejected, mut sides) = (Vec::new(), Vec::new(), Vec::new());
        for (k, (lo, hi)) in bounds.into_iter().enumerate() {
            let chunk: Vec<Document> = docs.by_ref().take(hi - lo).collect();
            let kept_path = work.join(format!("shard-{k:04}.jsonl"));
            let rej_path = work.join(format!("shard-{k:04}.rejects.jsonl"));
            // The side value doubles as the completion marker.
            let done = work.join(format!("shard-{k:04}.done.json"));
            let (k_docs, r_docs, side) = match fs::read_to_string(&done) {
                Ok(side) => (
                    read_docs(stage, &kept_path)?,
                    read_docs(stage, &rej_path)?,
                    serde_json::from_str(&side).map_err(|e| PipelineError::stage(stage, e))?,
                ),
                Err(_) => {
                    let ((k_docs, r_docs), side) = f(chunk)?;
                    write_records(&k_docs, &kept_path).map_err(|e| PipelineError::stage(stage, e))?;
                    write_records(&r_docs, &rej_path).map_err(|e| PipelineError::stage(stage, e))?;
                    fs::write(&done, side.to_string()).map_err(|e| PipelineError::stage(stage, e))?;
                    (k_docs, r_docs, side)
                }
            };
            kept.extend(k_docs);
            rejected.extend(r_docs);
            sides.push(side);
            if self.interrupted(stage, Some(k + 1)) {
                return Err(PipelineError::Interrupted(format!("{stage} shard {k}")));
            }
        }
        Ok(((kept, rejected), sides))
    }

    /// Writes a stage's outputs, records it in the manifest and drops its
    /// shard checkpoints.
    fn commit(
        &mut self,
        stage: &str,
        input_digest: String,
        input_count: usize,
        split: &Split,
        started: Instant,
    ) -> Result<(), PipelineError> {
        let (kept, rejected) = split;
        if kept.len() + rejected.len() != input_count {
            return Err(PipelineError::stage(
                stage,
                format!("conservation violated: {input_count} in, {} out, {} rejected", kept.len(), rejected.len()),
            ));
        }
        let out = stage_output_path(&self.run_dir, stage);
        let rej = stage_rejects_path(&self.run_dir, stage);
        write_records(kept, &out).map_err(|e| PipelineError::stage(stage, e))?;
        write_records(rejected, &rej).map_err(|e| PipelineError::stage(stage, e))?;
        self.manifest.upsert(StageRecord {
            name: stage.to_owned(),
            input_digest,
            output_digest: file_digest(&out).map_err(|e| PipelineError::stage(stage, e))?,
            rejects_digest: file_digest(&rej).map_err(|e| PipelineError::stage(stage, e))?,
            input_count: input_count as u64,
            output_count: kept.len() as u64,
            reject_count: rejected.len() as u64,
            wall_clock_ms: started.elapsed().as_millis(),
        });
        self.manifest.save(&self.run_dir)?;
        let _ = fs::remove_dir_all(self.run_dir.join("work").join(stage));
        if self.interrupted(stage, None) {
            return Err(PipelineError::Interrupted(stage.to_owned()));
        }
        Ok(())
    }

    /// Reuses a committed stage when its input and output digests still match.
    fn reusable(&self, stage: &str, input_digest: &str) -> Option<Vec<Document>> {
        let rec = self.manifest.stage(stage)?;
        if rec.input_digest != input_digest {
            return None;
        }
        let out = stage_output_path(&self.run_dir, stage);
        let rej = stage_rejects_path(&self.run_dir, stage);
        let matches = file_digest(&out).ok()? == rec.output_digest && file_digest(&rej).ok()? == rec.rejects_digest;
        if !matches {
            return None;
        }
        let (docs, errors) = read_all(&out).ok()?;
        errors.is_empty().then_some(docs)
    }

    fn output_digest(&self, stage: &str) -> Result<String, PipelineError> {
        file_digest(&stage_output_path(&self.run_dir, stage)).map_err(|e| PipelineError::stage(stage, e))
    }
}

fn read_docs(stage: &str, path: &Path) -> Result<Vec<Document>, PipelineError> {
    let (docs, errors) = read_all(path).map_err(|e| PipelineError::stage(stage, e))?;
    match errors.first() {
        Some(e) => Err(PipelineError::stage(stage, e)),
        None => Ok(docs),
    }
}

/// Reads every WARC input in order. Responses without a record id get
/// `"{uri}#{index}"`, counting responses across all inputs.
pub fn read_warc_inputs(paths: &[PathBuf]) -> Result<(Vec<WarcRecord>, Vec<String>), PipelineError> {
    let mut records = Vec::new();
    let mut errors = Vec::new();
    for path in paths {
        let file = fs::File::open(path).map_err(|e| PipelineError::stage("extract", format!("{}: {e}", path.display())))?;
        let reader = read_warc(file).map_err(|e| PipelineError::stage("extract", e))?;
        for item in reader {
            match item {
                Ok(r) => records.push(r),
                Err(e) if e.is_fatal() => {
                    return Err(PipelineError::stage("extract", format!("{}: {e}", path.display())))
                }
                Err(e) => errors.push(format!("{}: {e}", path.display())),
            }
        }
    }
    // Responses without a record id get a stable positional one.
    for (index, r) in records.iter_mut().filter(|r| r.warc_type == WarcType::Response).enumerate() {
        if r.record_id.is_none() {
            r.record_id = Some(format!("{}#{index}", r.target_uri));
        }
    }
    Ok((records, errors))
}

/// Builds the safety gate from configuration; baseline scorers stand in for
/// missing commands.
pub fn build_safety_gate(cfg: &PipelineConfig) -> Result<SafetyGate, PipelineError> {
    let s = &cfg.safety;
    let err = |e: &dyn std::fmt::Display| PipelineError::stage("safety", e);
    Ok(SafetyGate {
        domains: match &s.domains {
            Some(p) => DomainBlocklist::load(p).map_err(|e| err(&e))?,
            None => DomainBlocklist::default(),
        },
        words: match &s.words {
            Some(p) => WordBlocklist::load(p).map_err(|e| err(&e))?,
            None => WordBlocklist::new(Vec::<String>::new()),
        },
        toxicity: stages::scorer_or(
            s.toxicity_cmd.as_deref(),
            "toxicity",
            s.max_in_flight,
            Arc::new(LexiconScorer::toxicity_baseline()),
        ),
        pornography: stages::scorer_or(
            s.porn_cmd.as_deref(),
            "pornography",
            s.max_in_flight,
            Arc::new(LexiconScorer::pornography_baseline()),
        ),
        pii: match &s.pii {
            Some(p) => PiiRegistry::load(p).map_err(|e| err(&e))?,
            None => PiiRegistry::default(),
        },
        thresholds: SafetyThresholds {
            toxicity: s.toxicity_threshold,
            pornography: s.porn_threshold,
            fail_closed: s.fail_closed,
        },
    })
}

pub fn build_quality_scorers(cfg: &PipelineConfig) -> Result<QualityScorers, PipelineError> {
    let q = &cfg.quality;
    Ok(QualityScorers {
        ad: stages::scorer_or(q.ad_cmd.as_deref(), "advertisement", q.max_in_flight, Arc::new(LexiconScorer::ad_baseline())),
        fluency: stages::scorer_or(q.fluency_cmd.as_deref(), "fluency", q.max_in_flight, Arc::new(FluencyBaseline)),
        weights: FluencyWeights::new(q.fluency_weights).map_err(|e| PipelineError::stage("quality", e))?,
    })
}

fn selection_config(cfg: &PipelineConfig) -> SelectionConfig {
    SelectionConfig {
        w_flu: cfg.quality.w_flu,
        w_ad: cfg.quality.w_ad,
        min_fluency: cfg.quality.min_fluency,
        max_ad: cfg.quality.max_ad,
    }
}

pub fn run_dir_for(cfg: &PipelineConfig) -> (String, PathBuf) {
    let run_id = cfg.run_id.clone().unwrap_or_else(|| default_run_id(cfg));
    let dir = cfg.output_dir.join(&run_id);
    (run_id, dir)
}

/// Runs the enabled stages in order, persisting each stage's output and
/// rejects, then writes the reports. With `resume`, committed stages whose
/// inputs are unchanged are reused and finished shards are not recomputed.
pub fn run(cfg: &PipelineConfig, opts: &RunOptions) -> Result<RunManifest, PipelineError> {
    let mut cfg = cfg.clone();
    if let Some(s) = opts.shards {
        cfg.shards = s;
    }
    let diags = validate_config(&cfg);
    if has_errors(&diags) {
        return Err(PipelineError::Config(diags));
    }
    for d in &diags {
        log::warn!("{d}");
    }
    // The shard count does not affect outputs, so it is not part of the run id.
    let mut id_cfg = cfg.clone();
    id_cfg.shards = 1;
    let (run_id, run_dir) = run_dir_for(&id_cfg);
    fs::create_dir_all(&run_dir).map_err(|e| PipelineError::stage("setup", e))?;

    let previous = if opts.resume { RunManifest::load(&run_dir).ok() } else { None };
    if !opts.resume {
        let _ = fs::remove_dir_all(run_dir.join("work"));
    }
    let manifest = RunManifest {
        run_id,
        shards: cfg.shards,
        config: cfg.clone(),
        stages: previous.as_ref().map(|m| m.stages.clone()).unwrap_or_default(),
        stage_stats: Vec::new(),
        completed: false,
        notes: previous.map(|m| m.notes).unwrap_or_default(),
    };
    let mut r = Runner { cfg: &cfg, run_dir, shards: cfg.shards, interrupt: opts.interrupt.as_ref(), manifest, tokenizer: WhitespaceTokenizer };
    r.manifest.save(&r.run_dir)?;

    // Stage 0: the crawl itself, then extraction (or pre-extracted records).
    let mut docs: Vec<Document>;
    let mut prev_digest: String;
    let mut stats: Vec<StageStats> = Vec::new();
    if cfg.enabled("extract") {
        let input_digest = files_digest(&cfg.input.warc).map_err(|e| PipelineError::stage("extract", e))?;
        let (records, read_errors) = read_warc_inputs(&cfg.input.warc)?;
        let responses: Vec<WarcRecord> = records.into_iter().filter(|r| r.warc_type == WarcType::Response).collect();
        stats.push(StageStats {
            stage: "crawl".into(),
            documents: responses.len() as u64,
            bytes: responses.iter().map(|r| r.body.len() as u64).sum(),
            tokens: 0,
            relative_removal_rate: 0.0,
            absolute_retention_rate: 0.0,
        });
        r.manifest.notes.insert("warc_read_errors".into(), serde_json::json!(read_errors));
        docs = match r.reusable("extract", &input_digest) {
            Some(d) => d,
            None => {
                let started = Instant::now();
                let n = responses.len();
                // Shard over records: wrap each in a placeholder document keyed by position.
                let split = shard_records(&r, &input_digest, responses)?;
                r.commit("extract", input_digest, n, &split, started)?;
                split.0
            }
        };
        prev_digest = r.output_digest("extract")?;
    } else {
        docs = Vec::new();
        for p in &cfg.input.records {
            docs.extend(read_docs("input", p)?);
        }
        prev_digest = files_digest(&cfg.input.records).map_err(|e| PipelineError::stage("input", e))?;
    }
    stats.push(StageStats::measure("raw", &docs, &r.tokenizer));

    for stage in ["clean", "dedup", "safety", "quality"] {
        let input_digest = prev_digest.clone();
        if let Some(d) = r.reusable(stage, &input_digest) {
            docs = d;
        } else {
            let started = Instant::now();
            let n = docs.len();
            let split = if !cfg.enabled(stage) {
                let mut d = docs;
                d.iter_mut().for_each(|x| x.advance(output_stage(stage)));
                (d, Vec::new())
            } else {
                match stage {
                    "clean" => {
                        let hc = match &cfg.clean.config {
                            Some(p) => HeuristicConfig::load(p).map_err(|e| PipelineError::stage(stage, e))?,
                            None => HeuristicConfig::default(),
                        };
                        let filter = HeuristicFilter::new(hc);
                        r.sharded(stage, &input_digest, docs, &|chunk| {
                            Ok((stages::clean_documents(chunk, &filter), serde_json::Value::Null))
                        })?
                        .0
                    }
                    "dedup" => stages::dedup_documents(docs, &cfg.dedup, cfg.seed).map_err(|e| PipelineError::stage(stage, e))?,
                    "safety" => {
                        let gate = build_safety_gate(&cfg)?;
                        let (split, parts) = r.sharded(stage, &input_digest, docs, &|chunk| {
                            let (split, rep) = stages::safety_documents(chunk, &gate);
                            Ok((split, serde_json::to_value(&rep).expect("report serializes")))
                        })?;
                        let mut report = SafetyReport::new(gate.pii.pattern_errors().len());
                        for part in parts {
                            let part: SafetyReport = serde_json::from_value(part).map_err(|e| PipelineError::stage(stage, e))?;
                            merge_safety(&mut report, &part);
                        }
                        r.manifest.notes.insert("safety".into(), serde_json::to_value(&report).expect("report"));
                        split
                    }
                    _ => {
                        let scorers = build_quality_scorers(&cfg)?;
                        let (sel, failures) = stages::quality_documents(
                            docs,
                            &scorers,
                            cfg.quality.budget_tokens,
                            &selection_config(&cfg),
                            &r.tokenizer,
                        );
                        r.manifest.notes.insert(
                            "quality".into(),
                            serde_json::json!({
                                "scorer_failures": failures,
                                "selected_tokens": sel.selected_tokens,
                                "scored_tokens": sel.corpus_tokens,
                                "budget_tokens": cfg.quality.budget_tokens,
                                "budget_exceeds_corpus": sel.budget_exceeds_corpus,
                            }),
                        );
                        (sel.selected, sel.rejected)
                    }
                }
            };
            r.commit(stage, input_digest, n, &split, started)?;
            docs = split.0;
        }
        prev_digest = r.output_digest(stage)?;
        stats.push(StageStats::measure(output_name(stage), &docs, &r.tokenizer));
    }

    let report = retention_report(&stats).map_err(|e| PipelineError::stage("report", e))?;
    r.manifest.stage_stats = report.stage_stats();
    r.manifest.completed = true;
    r.manifest.save(&r.run_dir)?;
    write_reports(&r.run_dir, &r.manifest)?;
    Ok(r.manifest)
}

/// Extraction sharded over response records. The checkpoint machinery works
/// on documents, so each shard's records are extracted inside the closure.
fn shard_records(r: &Runner<'_>, input_digest: &str, responses: Vec<WarcRecord>) -> Result<Split, PipelineError> {
    let slots: Vec<Document> = (0..responses.len()).map(|i| Document::new(i.to_string(), "", "")).collect();
    let responses = std::sync::Mutex::new(responses.into_iter().map(Some).collect::<Vec<_>>());
    r.sharded("extract", input_digest, slots, &|chunk| {
        let mut taken = responses.lock().expect("records lock");
        let records: Vec<_> = chunk
            .iter()
            .map(|slot| Ok(taken[slot.id.parse::<usize>().expect("slot index")].take().expect("record used once")))
            .collect();
        drop(taken);
        let out = stages::extract_records(records, &r.cfg.extract);
        Ok(((out.kept, out.rejected), serde_json::Value::Null))
    })
    .map(|(split, _)| split)
}

fn merge_safety(total: &mut SafetyReport, part: &SafetyReport) {
    total.documents += part.documents;
    for (k, v) in &part.flagged {
        *total.flagged.entry(k.clone()).or_default() += v;
    }
    total.discarded += part.discarded;
    total.kept += part.kept;
    total.docs_with_pii += part.docs_with_pii;
    total.pii_spans += part.pii_spans;
    total.unparseable_urls += part.unparseable_urls;
    for (k, v) in &part.scorer_failures {
        *total.scorer_failures.entry(k.clone()).or_default() += v;
    }
}

fn write_report(dir: &Path, name: &str, json: &impl Serialize, text: Option<String>) -> Result<(), PipelineError> {
    let err = |e: std::io::Error| PipelineError::stage("report", e);
    fs::write(dir.join(format!("{name}.json")), serde_json::to_string_pretty(json).expect("report serializes") + "\n")
        .map_err(err)?;
    if let Some(t) = text {
        fs::write(dir.join(format!("{name}.txt")), t).map_err(err)?;
    }
    Ok(())
}

/// (Re)writes every report for a completed run from its manifest and stage
/// files: retention, document statistics, quality signals, per-year volumes,
/// safety accounting and safety score curves.
pub fn write_reports(run_dir: &Path, manifest: &RunManifest) -> Result<(), PipelineError> {
    let cfg = &manifest.config;
    let dir = run_dir.join("reports");
    fs::create_dir_all(&dir).map_err(|e| PipelineError::stage("report", e))?;
    let tokenizer = WhitespaceTokenizer;

    let retention = retention_report(&manifest.stage_stats).map_err(|e| PipelineError::stage("report", e))?;
    write_report(&dir, "retention", &retention, Some(retention.render()))?;

    let final_docs = read_docs("report", &stage_output_path(run_dir, "quality"))?;
    let stats = stats_report(&final_docs, &tokenizer, cfg.reports.histogram_bins);
    write_report(&dir, "stats", &stats, Some(stats.render()))?;

    let annotations = match &cfg.reports.annotations {
        Some(p) => Some(QualitySignalReport::load_annotations(p).map_err(|e| PipelineError::stage("report", e))?),
        None => None,
    };
    let signals = quality_signals(&final_docs, annotations.as_ref(), &SignalConfig::default());
    write_report(&dir, "signals", &signals, Some(signals.render()))?;

    write_report(&dir, "years", &dump_year_volumes(&final_docs, &tokenizer), None)?;

    if let Some(s) = manifest.notes.get("safety") {
        write_report(&dir, "safety", s, None)?;
    }
    let mut scored = read_docs("report", &stage_output_path(run_dir, "safety"))?;
    scored.extend(read_docs("report", &stage_rejects_path(run_dir, "safety"))?);
    let grid = default_grid(cfg.reports.curve_points);
    let mut curves = BTreeMap::new();
    for (name, get) in [
        ("toxicity", (|a: &crate::safety::SafetyAnnotations| a.toxicity) as fn(&_) -> _),
        ("pornography", |a: &crate::safety::SafetyAnnotations| a.pornography),
    ] {
        let scores: Vec<f64> = scored.iter().filter_map(|d| d.safety.as_ref().and_then(get)).collect();
        if let Ok(curve) = exceedance_curve(&scores, &grid) {
            let area = auc(&curve).map_err(|e| PipelineError::stage("report", e))?;
            curves.insert(name, serde_json::json!({ "auc": area, "curve": curve }));
        }
    }
    write_report(&dir, "safety_curves", &curves, None)?;
    write_jsonl(std::iter::once(&manifest.stage_stats), dir.join("stage_stats.jsonl"))
        .map_err(|e: RecordError| PipelineError::stage("report", e))?;
    Ok(())
}

/// Re-emits the reports of a finished run.
pub fn report(run_dir: &Path) -> Result<RunManifest, PipelineError> {
    let manifest = RunManifest::load(run_dir)?;
    if !manifest.completed {
        return Err(PipelineError::stage("report", "run did not complete; resume it first"));
    }
    write_reports(run_dir, &manifest)?;
    Ok(manifest)
}

/// Token count of a document set, for callers that only need the total.
pub fn total_tokens(docs: &[Document], tokenizer: &dyn Tokenizer) -> u64 {
    docs.iter().map(|d| tokenizer.count_tokens(&d.text) as u64).sum()
}
