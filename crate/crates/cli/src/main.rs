mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "refinery", version, about = "Web-crawl corpus curation pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Log level (error, warn, info, debug, trace)
    #[arg(long, default_value = "warn", global = true)]
    log_level: String,
}

#[derive(Subcommand)]
pub enum Command {
    /// Extract raw documents from WARC files
    Extract {
        #[arg(long, num_args = 1.., required = true)]
        input: Vec<PathBuf>,
        #[arg(long)]
        output: PathBuf,
        /// Rejected responses (non-200, non-HTML, empty, wrong language)
        #[arg(long)]
        rejects: Option<PathBuf>,
        /// Languages to keep
        #[arg(long = "lang", default_values = ["en"])]
        languages: Vec<String>,
        /// Dump label for every document instead of the ISO week of WARC-Date
        #[arg(long)]
        dump_id: Option<String>,
    },
    /// Apply heuristic rewrites and drop rules
    Clean {
        #[arg(long, num_args = 1.., required = true)]
        input: Vec<PathBuf>,
        #[arg(long)]
        output: PathBuf,
        /// TOML file overriding rule thresholds and lists
        #[arg(long)]
        rules: Option<PathBuf>,
        #[arg(long)]
        rejects: Option<PathBuf>,
    },
    /// Remove near-duplicates with MinHash LSH
    Dedup {
        #[arg(long, num_args = 1.., required = true)]
        input: Vec<PathBuf>,
        #[arg(long)]
        output: PathBuf,
        #[arg(long)]
        rejects: Option<PathBuf>,
        #[arg(long, default_value_t = 0.7)]
        threshold: f64,
        #[arg(long, default_value_t = 128)]
        num_perm: usize,
        #[arg(long, default_value_t = 5)]
        shingle: usize,
        #[arg(long, default_value_t = refinery::minhash::DEFAULT_SEED)]
        seed: u64,
        /// Explicit banding (requires --rows); otherwise chosen by search
        #[arg(long, requires = "rows")]
        bands: Option<usize>,
        #[arg(long, requires = "bands")]
        rows: Option<usize>,
        /// Every cluster, singletons included
        #[arg(long)]
        clusters: Option<PathBuf>,
        /// Signature cache; reused when it matches the inputs, written otherwise
        #[arg(long)]
        signatures: Option<PathBuf>,
    },
    /// Blocklist, toxicity and pornography gating plus PII masking
    Safety {
        #[arg(long, num_args = 1.., required = true)]
        input: Vec<PathBuf>,
        #[arg(long)]
        output: PathBuf,
        #[arg(long)]
        rejects: Option<PathBuf>,
        #[arg(long)]
        domains: Option<PathBuf>,
        #[arg(long)]
        words: Option<PathBuf>,
        #[arg(long)]
        pii: Option<PathBuf>,
        /// Scorer command speaking the line protocol; baseline lexicon if absent
        #[arg(long)]
        toxicity_cmd: Option<String>,
        #[arg(long)]
        porn_cmd: Option<String>,
        /// Threshold for both scorers
        #[arg(long, default_value_t = 0.2)]
        threshold: f64,
        #[arg(long)]
        fail_closed: bool,
        /// Concurrent scorer processes per command
        #[arg(long, default_value_t = 1)]
        max_in_flight: usize,
        /// Safety accounting as JSON
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Score ads and fluency, then select the budgeted high-quality subset
    Quality {
        #[arg(long, num_args = 1.., required = true)]
        input: Vec<PathBuf>,
        #[arg(long)]
        output: PathBuf,
        #[arg(long)]
        rejects: Option<PathBuf>,
        #[arg(long, default_value_t = 1_000_000)]
        budget_tokens: u64,
        #[arg(long)]
        ad_cmd: Option<String>,
        #[arg(long)]
        fluency_cmd: Option<String>,
        #[arg(long, default_value_t = 0.5)]
        w_flu: f64,
        #[arg(long, default_value_t = 0.5)]
        w_ad: f64,
        /// Drop documents at or below this fluency before ranking
        #[arg(long)]
        min_fluency: Option<f64>,
        /// Drop documents above this ad score before ranking
        #[arg(long)]
        max_ad: Option<f64>,
        #[arg(long, default_value_t = 1)]
        max_in_flight: usize,
    },
    /// Per-document statistics and histograms
    Stats {
        #[arg(long, num_args = 1.., required = true)]
        input: Vec<PathBuf>,
        /// Report path; JSON is written here and the table next to it as .txt
        #[arg(long)]
        report: PathBuf,
        #[arg(long, default_value_t = 20)]
        bins: usize,
    },
    /// Machine-computed and sampled quality signals
    Signals {
        #[arg(long, num_args = 1.., required = true)]
        input: Vec<PathBuf>,
        #[arg(long)]
        report: PathBuf,
        /// Human annotation counts: {"family.metric": {"a": .., "b": ..}}
        #[arg(long)]
        annotations: Option<PathBuf>,
    },
    /// Exceedance curves and AUC from a score file (id plus per-dimension scores per line)
    Auc {
        #[arg(long, num_args = 1.., required = true)]
        input: Vec<PathBuf>,
        #[arg(long)]
        report: PathBuf,
        #[arg(long, default_value_t = 101)]
        points: usize,
    },
    /// Stage-over-stage removal and cumulative retention from stage record files, in order
    Retention {
        #[arg(long, num_args = 1.., required = true)]
        input: Vec<PathBuf>,
        #[arg(long)]
        report: PathBuf,
    },
    /// Stratified sample over a per-document scalar file ({"id": .., "score": ..} per line)
    Sample {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Sample size per quantile stratum, lowest scores first
        #[arg(long, value_delimiter = ',', default_values_t = [2000, 1000, 2000])]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run the configured stages end to end
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Resume the given run from its last completed stage and shard
        #[arg(long, value_name = "RUN_ID")]
        resume: Option<String>,
        #[arg(long)]
        shards: Option<usize>,
    },
    /// Re-emit all reports of a finished run
    Report {
        run_id: String,
        /// Directory holding runs (defaults to the config's output_dir, else ./runs)
        #[arg(long)]
        runs_dir: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Check a pipeline config and print diagnostics
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new().parse_filters(&cli.log_level).init();
    match commands::execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(e.exit_code())
        }
    }
}
