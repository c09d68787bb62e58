use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::minhash::{DEFAULT_NUM_PERM, DEFAULT_SEED, DEFAULT_SHINGLE, DEFAULT_THRESHOLD};
use crate::quality::DEFAULT_AD_THRESHOLD;
use crate::safety::{DEFAULT_PORNOGRAPHY_THRESHOLD, DEFAULT_TOXICITY_THRESHOLD};

/// Pipeline stages in their fixed execution order.
pub const STAGE_ORDER: [&str; 5] = ["extract", "clean", "dedup", "safety", "quality"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub run_id: Option<String>,
    pub output_dir: PathBuf,
    pub shards: usize,
    pub seed: u64,
    /// Enabled stages. Any subset of [`STAGE_ORDER`], listed in that order.
    pub stages: Vec<String>,
    pub input: InputConfig,
    pub extract: ExtractConfig,
    pub clean: CleanConfig,
    pub dedup: DedupConfig,
    pub safety: SafetyConfig,
    pub quality: QualityConfig,
    pub reports: ReportConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            run_id: None,
            output_dir: PathBuf::from("runs"),
            shards: 1,
            seed: DEFAULT_SEED,
            stages: STAGE_ORDER.iter().map(|s| s.to_string()).collect(),
            input: InputConfig::default(),
            extract: ExtractConfig::default(),
            clean: CleanConfig::default(),
            dedup: DedupConfig::default(),
            safety: SafetyConfig::default(),
            quality: QualityConfig::default(),
            reports: ReportConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InputConfig {
    /// WARC files, read when the extract stage is enabled.
    pub warc: Vec<PathBuf>,
    /// Record files, read when the extract stage is disabled.
    pub records: Vec<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExtractConfig {
    pub languages: Vec<String>,
    /// Dump label for every extracted document; derived from the record
    /// date (ISO year-week) when unset.
    pub dump_id: Option<String>,
    pub density_threshold: f64,
}

impl Default for ExtractConfig {
    fn default() -> Self {
        ExtractConfig { languages: vec!["en".into()], dump_id: None, density_threshold: 0.2 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CleanConfig {
    /// Heuristic rule configuration file; built-in defaults when unset.
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DedupConfig {
    pub num_perm: usize,
    pub shingle: usize,
    pub threshold: f64,
    /// Override the optimized banding plan.
    pub bands: Option<usize>,
    pub rows: Option<usize>,
}

impl Default for DedupConfig {
    fn default() -> Self {
        DedupConfig {
            num_perm: DEFAULT_NUM_PERM,
            shingle: DEFAULT_SHINGLE,
            threshold: DEFAULT_THRESHOLD,
            bands: None,
            rows: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SafetyConfig {
    pub domains: Option<PathBuf>,
    pub words: Option<PathBuf>,
    pub pii: Option<PathBuf>,
    pub toxicity_cmd: Option<String>,
    pub porn_cmd: Option<String>,
    pub toxicity_threshold: f64,
    pub porn_threshold: f64,
    pub fail_closed: bool,
    /// Worker processes per external scorer.
    pub max_in_flight: usize,
}

impl Default for SafetyConfig {
    fn default() -> Self {
        SafetyConfig {
            domains: None,
            words: None,
            pii: None,
            toxicity_cmd: None,
            porn_cmd: None,
            toxicity_threshold: DEFAULT_TOXICITY_THRESHOLD,
            porn_threshold: DEFAULT_PORNOGRAPHY_THRESHOLD,
            fail_closed: false,
            max_in_flight: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QualityConfig {
    pub budget_tokens: u64,
    pub ad_cmd: Option<String>,
    pub fluency_cmd: Option<String>,
    pub w_flu: f64,
    pub w_ad: f64,
    pub ad_threshold: f64,
    pub min_fluency: Option<f64>,
    pub max_ad: Option<f64>,
    /// consistency, noisy, information, grammar
    pub fluency_weights: [f64; 4],
    pub max_in_flight: usize,
}

impl Default for QualityConfig {
    fn default() -> Self {
        QualityConfig {
            budget_tokens: 1_000_000,
            ad_cmd: None,
            fluency_cmd: None,
            w_flu: 0.5,
            w_ad: 0.5,
            ad_threshold: DEFAULT_AD_THRESHOLD,
            min_fluency: None,
            max_ad: None,
            fluency_weights: [0.25; 4],
            max_in_flight: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportConfig {
    pub histogram_bins: usize,
    /// Human-annotation counts for sampled quality signals.
    pub annotations: Option<PathBuf>,
    pub curve_points: usize,
}

impl Default for ReportConfig {
    fn default() -> Self {
        ReportConfig { histogram_bins: 20, annotations: None, curve_points: 101 }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigLoadError {
    #[error("reading {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("parsing config: {0}")]
    Parse(#[from] toml::de::Error),
}

impl PipelineConfig {
    pub fn from_toml(s: &str) -> Result<Self, ConfigLoadError> {
        Ok(toml::from_str(s)?)
    }

    /// Loads a config file; relative paths inside it are resolved against
    /// the file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigLoadError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigLoadError::Io { path: path.display().to_string(), source })?;
        let mut cfg = Self::from_toml(&text)?;
        if let Some(base) = path.parent() {
            cfg.resolve_paths(base);
        }
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.output_dir);
        self.input.warc.iter_mut().for_each(fix);
        self.input.records.iter_mut().for_each(fix);
        for p in [&mut self.clean.config, &mut self.safety.domains, &mut self.safety.words, &mut self.safety.pii]
            .into_iter()
            .flatten()
        {
            fix(p);
        }
        if let Some(p) = self.reports.annotations.as_mut() {
            fix(p);
        }
    }

    pub fn enabled(&self, stage: &str) -> bool {
        self.stages.iter().any(|s| s == stage)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{tag}: {}", self.message)
    }
}

pub fn has_errors(diags: &[Diagnostic]) -> bool {
    diags.iter().any(|d| d.severity == Severity::Error)
}

/// Checks stage order, fraction-valued settings and banding overrides, and
/// warns when baseline scorers will stand in for external ones.
pub fn validate_config(cfg: &PipelineConfig) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let mut error = |m: String| out.push(Diagnostic { severity: Severity::Error, message: m });

    let mut last: Option<(usize, &str)> = None;
    for s in &cfg.stages {
        match STAGE_ORDER.iter().position(|x| x == s) {
            None => error(format!("unknown stage {s:?}")),
            Some(i) => {
                if let Some((j, prev)) = last {
                    if i <= j {
                        error(format!(
                            "stage {s:?} listed after {prev:?}; stages run in fixed order: {}",
                            STAGE_ORDER.join(" -> ")
                        ));
                    }
                }
                last = Some((i, s));
            }
        }
    }
    if cfg.shards == 0 {
        error("shards must be at least 1".into());
    }

    let fractions = [
        ("extract.density_threshold", Some(cfg.extract.density_threshold)),
        ("dedup.threshold", Some(cfg.dedup.threshold)),
        ("safety.toxicity_threshold", Some(cfg.safety.toxicity_threshold)),
        ("safety.porn_threshold", Some(cfg.safety.porn_threshold)),
        ("quality.ad_threshold", Some(cfg.quality.ad_threshold)),
        ("quality.min_fluency", cfg.quality.min_fluency),
        ("quality.max_ad", cfg.quality.max_ad),
    ];
    for (name, v) in fractions {
        if let Some(v) = v {
            if !(0.0..=1.0).contains(&v) {
                error(format!("{name} = {v} is outside [0, 1]"));
            }
        }
    }
    if cfg.quality.w_flu < 0.0 || cfg.quality.w_ad < 0.0 {
        error("quality weights must be non-negative".into());
    }
    if crate::quality::FluencyWeights::new(cfg.quality.fluency_weights).is_err() {
        error("quality.fluency_weights must be non-negative with a positive sum".into());
    }
    if cfg.dedup.num_perm == 0 || cfg.dedup.shingle == 0 {
        error("dedup.num_perm and dedup.shingle must be positive".into());
    }
    match (cfg.dedup.bands, cfg.dedup.rows) {
        (Some(b), Some(r)) if b == 0 || r == 0 || b * r > cfg.dedup.num_perm => error(format!(
            "dedup bands x rows = {b} x {r} must be positive and at most num_perm = {}",
            cfg.dedup.num_perm
        )),
        (Some(_), None) | (None, Some(_)) => error("dedup.bands and dedup.rows must be set together".into()),
        _ => {}
    }
    if cfg.enabled("extract") && cfg.input.warc.is_empty() {
        error("extract is enabled but input.warc is empty".into());
    }
    if !cfg.enabled("extract") && cfg.input.records.is_empty() {
        error("extract is disabled but input.records is empty".into());
    }

    let baseline: Vec<&str> = [
        (cfg.enabled("safety") && cfg.safety.toxicity_cmd.is_none(), "toxicity"),
        (cfg.enabled("safety") && cfg.safety.porn_cmd.is_none(), "pornography"),
        (cfg.enabled("quality") && cfg.quality.ad_cmd.is_none(), "advertisement"),
        (cfg.enabled("quality") && cfg.quality.fluency_cmd.is_none(), "fluency"),
    ]
    .into_iter()
    .filter_map(|(missing, name)| missing.then_some(name))
    .collect();
    if !baseline.is_empty() {
        out.push(Diagnostic {
            severity: Severity::Warning,
            message: format!("baseline scorers in use for: {}", baseline.join(", ")),
        });
    }
    out
}
