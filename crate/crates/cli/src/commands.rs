use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use refinery::corpus::{read_records, write_jsonl, write_records, Document, StageStats};
use refinery::heuristic::{HeuristicConfig, HeuristicFilter};
use refinery::metrics::{
    auc, default_grid, exceedance_curve, quality_signals, retention_report, stats_report, stratified_sample,
    QualitySignalReport, SignalConfig,
};
use refinery::minhash::{
    optimal_bands, read_signature_cache, write_signature_cache, BandingPlan, MinHasher, SignatureCache,
};
use refinery::pipeline::{
    self, build_quality_scorers, build_safety_gate, dedup_with_signatures, extract_records, has_errors,
    read_warc_inputs, validate_config, ExtractConfig, PipelineConfig, PipelineError, RunOptions, Severity,
};
use refinery::quality::SelectionConfig;
use refinery::text::WhitespaceTokenizer;
use serde::Serialize;

use crate::Command;

/// A failed command: bad arguments or configuration (exit 2) or a stage
/// that could not complete (exit 3).
pub enum Failure {
    Config(anyhow::Error),
    Stage(anyhow::Error),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Stage(_) => 3,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Config(e) | Failure::Stage(e) => {
                if f.alternate() {
                    write!(f, "{e:#}")
                } else {
                    write!(f, "{e}")
                }
            }
        }
    }
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Config(_) => Failure::Config(e.into()),
            _ => Failure::Stage(e.into()),
        }
    }
}

type Result<T> = std::result::Result<T, Failure>;

fn config_err(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Config(e.into())
}

fn stage_err(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Stage(e.into())
}

fn fraction(name: &str, v: f64) -> Result<f64> {
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(config_err(anyhow!("--{name} must be within [0, 1], got {v}")))
    }
}

fn require_inputs(paths: &[PathBuf]) -> Result<()> {
    match paths.iter().find(|p| !p.exists()) {
        Some(p) => Err(config_err(anyhow!("input {} does not exist", p.display()))),
        None => Ok(()),
    }
}

/// Reads record files in order. Malformed lines are skipped with a warning.
fn read_inputs(paths: &[PathBuf]) -> Result<Vec<Document>> {
    require_inputs(paths)?;
    let mut docs = Vec::new();
    for path in paths {
        let reader = read_records(path).with_context(|| path.display().to_string()).map_err(stage_err)?;
        for item in reader {
            match item {
                Ok(d) => docs.push(d),
                Err(e) if e.is_fatal() => {
                    return Err(stage_err(anyhow::Error::from(e).context(path.display().to_string())))
                }
                Err(e) => log::warn!("{}: skipping record: {e}", path.display()),
            }
        }
    }
    Ok(docs)
}

fn write_docs(docs: &[Document], path: &Path) -> Result<()> {
    write_records(docs, path).with_context(|| format!("writing {}", path.display())).map_err(stage_err)?;
    Ok(())
}

fn write_outputs(kept: &[Document], output: &Path, rejected: &[Document], rejects: Option<&Path>) -> Result<()> {
    write_docs(kept, output)?;
    if let Some(r) = rejects {
        write_docs(rejected, r)?;
    }
    eprintln!("{} kept, {} rejected", kept.len(), rejected.len());
    Ok(())
}

/// Writes `json` to `path` and, when given, the table next to it as `.txt`
/// (also echoed to stdout).
fn write_report(path: &Path, json: &impl Serialize, table: Option<String>) -> Result<()> {
    let body = serde_json::to_string_pretty(json).map_err(stage_err)? + "\n";
    fs::write(path, body).with_context(|| format!("writing {}", path.display())).map_err(stage_err)?;
    if let Some(t) = table {
        let txt = path.with_extension("txt");
        fs::write(&txt, &t).with_context(|| format!("writing {}", txt.display())).map_err(stage_err)?;
        print!("{t}");
    }
    Ok(())
}

pub fn execute(command: Command) -> Result<()> {
    match command {
        Command::Extract { input, output, rejects, languages, dump_id } => {
            require_inputs(&input)?;
            let (records, read_errors) = read_warc_inputs(&input)?;
            for e in &read_errors {
                log::warn!("{e}");
            }
            let cfg = ExtractConfig { languages, dump_id, ..Default::default() };
            let out = extract_records(records.into_iter().map(Ok), &cfg);
            eprintln!("{} responses, {} unreadable records", out.responses, read_errors.len());
            write_outputs(&out.kept, &output, &out.rejected, rejects.as_deref())
        }
        Command::Clean { input, output, rules, rejects } => {
            let cfg = match rules {
                Some(p) => HeuristicConfig::load(&p).map_err(config_err)?,
                None => HeuristicConfig::default(),
            };
            let docs = read_inputs(&input)?;
            let (kept, rejected) = pipeline::clean_documents(docs, &HeuristicFilter::new(cfg));
            write_outputs(&kept, &output, &rejected, rejects.as_deref())
        }
        Command::Dedup { input, output, rejects, threshold, num_perm, shingle, seed, bands, rows, clusters, signatures } => {
            fraction("threshold", threshold)?;
            if num_perm == 0 || shingle == 0 {
                return Err(config_err(anyhow!("--num-perm and --shingle must be positive")));
            }
            let plan = match (bands, rows) {
                (Some(b), Some(r)) => BandingPlan::new(b, r, threshold, num_perm).map_err(config_err)?,
                _ => optimal_bands(num_perm, threshold),
            };
            let docs = read_inputs(&input)?;
            let sigs = dedup_signatures(&docs, num_perm, shingle, seed, signatures.as_deref())?;
            let ((kept, rejected), all) = dedup_with_signatures(docs, sigs, &plan).map_err(stage_err)?;
            if let Some(path) = clusters {
                write_jsonl(all.iter(), &path).map_err(stage_err)?;
            }
            eprintln!("banding {} x {}", plan.bands, plan.rows);
            write_outputs(&kept, &output, &rejected, rejects.as_deref())
        }
        Command::Safety {
            input,
            output,
            rejects,
            domains,
            words,
            pii,
            toxicity_cmd,
            porn_cmd,
            threshold,
            fail_closed,
            max_in_flight,
            report,
        } => {
            fraction("threshold", threshold)?;
            let mut cfg = PipelineConfig::default();
            let s = &mut cfg.safety;
            (s.domains, s.words, s.pii) = (domains, words, pii);
            (s.toxicity_cmd, s.porn_cmd) = (toxicity_cmd, porn_cmd);
            (s.toxicity_threshold, s.porn_threshold) = (threshold, threshold);
            (s.fail_closed, s.max_in_flight) = (fail_closed, max_in_flight.max(1));
            let gate = build_safety_gate(&cfg).map_err(|e| config_err(anyhow!(e)))?;
            let docs = read_inputs(&input)?;
            let ((kept, rejected), rep) = pipeline::safety_documents(docs, &gate);
            if let Some(path) = report {
                write_report(&path, &rep, None)?;
            }
            write_outputs(&kept, &output, &rejected, rejects.as_deref())
        }
        Command::Quality {
            input,
            output,
            rejects,
            budget_tokens,
            ad_cmd,
            fluency_cmd,
            w_flu,
            w_ad,
            min_fluency,
            max_ad,
            max_in_flight,
        } => {
            if w_flu < 0.0 || w_ad < 0.0 {
                return Err(config_err(anyhow!("weights must be non-negative")));
            }
            min_fluency.map(|v| fraction("min-fluency", v)).transpose()?;
            max_ad.map(|v| fraction("max-ad", v)).transpose()?;
            let mut cfg = PipelineConfig::default();
            (cfg.quality.ad_cmd, cfg.quality.fluency_cmd) = (ad_cmd, fluency_cmd);
            cfg.quality.max_in_flight = max_in_flight.max(1);
            let scorers = build_quality_scorers(&cfg).map_err(|e| config_err(anyhow!(e)))?;
            let selection = SelectionConfig { w_flu, w_ad, min_fluency, max_ad };
            let docs = read_inputs(&input)?;
            let (sel, failures) =
                pipeline::quality_documents(docs, &scorers, budget_tokens, &selection, &WhitespaceTokenizer);
            if failures > 0 {
                log::warn!("{failures} documents could not be scored");
            }
            eprintln!("{} of {} scored tokens selected", sel.selected_tokens, sel.corpus_tokens);
            write_outputs(&sel.selected, &output, &sel.rejected, rejects.as_deref())
        }
        Command::Stats { input, report, bins } => {
            if bins == 0 {
                return Err(config_err(anyhow!("--bins must be positive")));
            }
            let docs = read_inputs(&input)?;
            let r = stats_report(&docs, &WhitespaceTokenizer, bins);
            write_report(&report, &r, Some(r.render()))
        }
        Command::Signals { input, report, annotations } => {
            let ann = match annotations {
                Some(p) => Some(QualitySignalReport::load_annotations(&p).context("reading annotations").map_err(config_err)?),
                None => None,
            };
            let docs = read_inputs(&input)?;
            let r = quality_signals(&docs, ann.as_ref(), &SignalConfig::default());
            write_report(&report, &r, Some(r.render()))
        }
        Command::Auc { input, report, points } => {
            if points < 2 {
                return Err(config_err(anyhow!("--points must be at least 2")));
            }
            require_inputs(&input)?;
            let scores = read_score_file(&input)?;
            let grid = default_grid(points);
            let mut out = BTreeMap::new();
            let mut table = format!("{:<24} {:>10} {:>10}\n", "dimension", "documents", "auc");
            for (dim, values) in &scores {
                let curve = exceedance_curve(values, &grid).map_err(stage_err)?;
                let area = auc(&curve).map_err(stage_err)?;
                table.push_str(&format!("{dim:<24} {:>10} {area:>10.4}\n", values.len()));
                out.insert(dim.clone(), serde_json::json!({ "documents": values.len(), "auc": area, "curve": curve }));
            }
            write_report(&report, &out, Some(table))
        }
        Command::Retention { input, report } => {
            let mut stats = Vec::new();
            for path in &input {
                let docs = read_inputs(std::slice::from_ref(path))?;
                let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("stage");
                let name = name.split('.').next().unwrap_or(name);
                stats.push(StageStats::measure(name, &docs, &WhitespaceTokenizer));
            }
            let r = retention_report(&stats).map_err(stage_err)?;
            write_report(&report, &r, Some(r.render()))
        }
        Command::Sample { input, output, sizes, seed } => {
            require_inputs(std::slice::from_ref(&input))?;
            let items = read_scalars(&input)?;
            let picked = stratified_sample(&items, &sizes, seed);
            let rows = picked.iter().map(|(id, stratum)| serde_json::json!({ "id": id, "stratum": stratum }));
            write_jsonl(rows, &output).map_err(stage_err)?;
            eprintln!("{} sampled from {}", picked.len(), items.len());
            Ok(())
        }
        Command::Run { config, resume, shards } => {
            let mut cfg = PipelineConfig::load(&config).map_err(config_err)?;
            let resuming = resume.is_some();
            if let Some(id) = resume {
                cfg.run_id = Some(id);
            }
            let manifest = pipeline::run(&cfg, &RunOptions { resume: resuming, shards, interrupt: None })?;
            let run_dir = cfg.output_dir.join(&manifest.run_id);
            let table = fs::read_to_string(run_dir.join("reports/retention.txt")).unwrap_or_default();
            print!("{table}");
            println!("run {} complete: {}", manifest.run_id, run_dir.display());
            Ok(())
        }
        Command::Report { run_id, runs_dir, config } => {
            let dir = match (runs_dir, config) {
                (Some(d), _) => d,
                (None, Some(c)) => PipelineConfig::load(&c).map_err(config_err)?.output_dir,
                (None, None) => PathBuf::from("runs"),
            };
            let run_dir = dir.join(&run_id);
            if !run_dir.join(pipeline::MANIFEST).exists() {
                return Err(config_err(anyhow!("no run {run_id} under {}", dir.display())));
            }
            pipeline::report(&run_dir)?;
            print!("{}", fs::read_to_string(run_dir.join("reports/retention.txt")).unwrap_or_default());
            println!("reports written to {}", run_dir.join("reports").display());
            Ok(())
        }
        Command::Validate { config } => {
            let cfg = PipelineConfig::load(&config).map_err(config_err)?;
            let diags = validate_config(&cfg);
            for d in &diags {
                println!("{d}");
            }
            if has_errors(&diags) {
                let n = diags.iter().filter(|d| d.severity == Severity::Error).count();
                return Err(config_err(anyhow!("{n} configuration error(s)")));
            }
            println!("config ok");
            Ok(())
        }
    }
}

/// Signatures for `docs`, taken from the cache when it was built with the
/// same parameters for the same ids, computed (and cached) otherwise. The
/// cache header does not record the shingle size; reuse it only with the
/// shingle size it was built with.
fn dedup_signatures(
    docs: &[Document],
    num_perm: usize,
    shingle: usize,
    seed: u64,
    cache: Option<&Path>,
) -> Result<Vec<refinery::minhash::MinHashSignature>> {
    if let Some(path) = cache.filter(|p| p.exists()) {
        let c = read_signature_cache(path).map_err(stage_err)?;
        let same_ids = c.entries.len() == docs.len() && c.entries.iter().zip(docs).all(|(e, d)| e.0 == d.id);
        if c.num_perm == num_perm && c.seed == seed && same_ids {
            log::info!("reusing signatures from {}", path.display());
            return Ok(c.entries.into_iter().map(|(_, s)| s).collect());
        }
        log::warn!("signature cache {} does not match the inputs; recomputing", path.display());
    }
    let hasher = MinHasher::new(num_perm, seed);
    let sigs: Vec<_> = docs.iter().map(|d| hasher.signature_of_text(&d.text, shingle)).collect();
    if let Some(path) = cache {
        let c = SignatureCache {
            num_perm,
            seed,
            entries: docs.iter().map(|d| d.id.clone()).zip(sigs.iter().cloned()).collect(),
        };
        write_signature_cache(path, &c).map_err(stage_err)?;
    }
    Ok(sigs)
}

/// A JSON object line with its file and 1-based line number.
type ObjectLine = (String, usize, serde_json::Map<String, serde_json::Value>);

fn json_lines(paths: &[PathBuf]) -> Result<Vec<ObjectLine>> {
    let mut out = Vec::new();
    for path in paths {
        let text = fs::read_to_string(path).with_context(|| path.display().to_string()).map_err(stage_err)?;
        for (n, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let value: serde_json::Value = serde_json::from_str(line)
                .with_context(|| format!("{}:{}", path.display(), n + 1))
                .map_err(stage_err)?;
            match value {
                serde_json::Value::Object(map) => out.push((path.display().to_string(), n + 1, map)),
                _ => return Err(stage_err(anyhow!("{}:{}: expected a JSON object", path.display(), n + 1))),
            }
        }
    }
    Ok(out)
}

/// Per-dimension scores from lines like `{"id": "d1", "toxicity": 0.1}`;
/// scores may also sit under a nested `"scores"` object.
fn read_score_file(paths: &[PathBuf]) -> Result<BTreeMap<String, Vec<f64>>> {
    let mut dims: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for (file, line, mut map) in json_lines(paths)? {
        map.remove("id");
        let fields = match map.remove("scores") {
            Some(serde_json::Value::Object(nested)) => nested,
            _ => map,
        };
        for (dim, v) in fields {
            let Some(x) = v.as_f64() else { continue };
            if !(0.0..=1.0).contains(&x) {
                return Err(stage_err(anyhow!("{file}:{line}: {dim} score {x} outside [0, 1]")));
            }
            dims.entry(dim).or_default().push(x);
        }
    }
    if dims.is_empty() {
        return Err(stage_err(anyhow!("no scores found")));
    }
    Ok(dims)
}

fn read_scalars(path: &Path) -> Result<Vec<(String, f64)>> {
    json_lines(&[path.to_path_buf()])?
        .into_iter()
        .map(|(file, line, map)| {
            let id = map.get("id").and_then(|v| v.as_str());
            let score = map.get("score").and_then(|v| v.as_f64());
            match (id, score) {
                (Some(id), Some(s)) => Ok((id.to_owned(), s)),
                _ => Err(stage_err(anyhow!("{file}:{line}: expected {{\"id\": string, \"score\": number}}"))),
            }
        })
        .collect()
}
