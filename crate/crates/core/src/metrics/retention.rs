use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Document, StageStats};
use crate::text::Tokenizer;

#[derive(Debug, Error, PartialEq)]
pub enum RetentionError {
    #[error("no stages")]
    Empty,
    #[error("initial stage {0:?} has no documents")]
    ZeroBase(String),
    #[error("document count grows from {prev} ({prev_stage}) to {next} ({next_stage})")]
    NonMonotone { prev_stage: String, prev: u64, next_stage: String, next: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetentionRow {
    pub stage: String,
    pub documents: u64,
    pub bytes: u64,
    pub tokens: u64,
    /// `1 - N_k / N_{k-1}`; zero for the first stage.
    pub relative_removal_rate: f64,
    /// `N_k / N_0`.
    pub absolute_retention_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetentionReport {
    pub rows: Vec<RetentionRow>,
}

/// Per-stage removal relative to the previous stage and retention relative
/// to the first stage.
pub fn retention_report(stats: &[StageStats]) -> Result<RetentionReport, RetentionError> {
    let first = stats.first().ok_or(RetentionError::Empty)?;
    if first.documents == 0 {
        return Err(RetentionError::ZeroBase(first.stage.clone()));
    }
    for w in stats.windows(2) {
        if w[1].documents > w[0].documents {
            return Err(RetentionError::NonMonotone {
                prev_stage: w[0].stage.clone(),
                prev: w[0].documents,
                next_stage: w[1].stage.clone(),
                next: w[1].documents,
            });
        }
    }
    let n0 = first.documents as f64;
    let rows = stats
        .iter()
        .enumerate()
        .map(|(k, s)| RetentionRow {
            stage: s.stage.clone(),
            documents: s.documents,
            bytes: s.bytes,
            tokens: s.tokens,
            relative_removal_rate: match k {
                0 => 0.0,
                _ if stats[k - 1].documents == 0 => 0.0,
                _ => 1.0 - s.documents as f64 / stats[k - 1].documents as f64,
            },
            absolute_retention_rate: s.documents as f64 / n0,
        })
        .collect();
    Ok(RetentionReport { rows })
}

impl RetentionReport {
    /// Stage stats with both rates filled in.
    pub fn stage_stats(&self) -> Vec<StageStats> {
        self.rows
            .iter()
            .map(|r| StageStats {
                stage: r.stage.clone(),
                documents: r.documents,
                bytes: r.bytes,
                tokens: r.tokens,
                relative_removal_rate: r.relative_removal_rate,
                absolute_retention_rate: r.absolute_retention_rate,
            })
            .collect()
    }

    pub fn render(&self) -> String {
        let mut out = format!(
            "{:<14} {:>10} {:>14} {:>12} {:>22} {:>24}\n",
            "stage", "documents", "bytes", "tokens", "removal vs previous %", "retention vs initial %"
        );
        for r in &self.rows {
            out.push_str(&format!(
                "{:<14} {:>10} {:>14} {:>12} {:>22.2} {:>24.2}\n",
                r.stage,
                r.documents,
                r.bytes,
                r.tokens,
                100.0 * r.relative_removal_rate,
                100.0 * r.absolute_retention_rate
            ));
        }
        out
    }
}

/// Leading four-digit year of a dump label such as `2023-06`, if any.
pub fn dump_year(dump_id: &str) -> Option<&str> {
    let year = dump_id.get(..4)?;
    let rest = &dump_id[4..];
    (year.bytes().all(|b| b.is_ascii_digit()) && !rest.starts_with(|c: char| c.is_ascii_digit())).then_some(year)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct YearVolume {
    pub year: String,
    pub documents: u64,
    pub bytes: u64,
    pub tokens: u64,
    pub document_share: f64,
    pub byte_share: f64,
    pub token_share: f64,
}

/// Totals per dump year (malformed labels go to `unknown`), with each
/// year's share of every measure.
pub fn dump_year_volumes(docs: &[Document], tokenizer: &dyn Tokenizer) -> Vec<YearVolume> {
    let mut groups: BTreeMap<String, (u64, u64, u64)> = BTreeMap::new();
    for d in docs {
        let year = dump_year(&d.dump_id).unwrap_or("unknown").to_owned();
        let g = groups.entry(year).or_default();
        g.0 += 1;
        g.1 += d.text.len() as u64;
        g.2 += tokenizer.count_tokens(&d.text) as u64;
    }
    let (td, tb, tt) = groups.values().fold((0, 0, 0), |a, g| (a.0 + g.0, a.1 + g.1, a.2 + g.2));
    let share = |x: u64, t: u64| if t == 0 { 0.0 } else { x as f64 / t as f64 };
    groups
        .into_iter()
        .map(|(year, (d, b, t))| YearVolume {
            year,
            documents: d,
            bytes: b,
            tokens: t,
            document_share: share(d, td),
            byte_share: share(b, tb),
            token_share: share(t, tt),
        })
        .collect()
}

/// Splits items by score into `sizes.len()` equal-count quantile strata
/// (lowest first) and draws `sizes[k]` items uniformly from stratum `k`
/// (all of them if the stratum is smaller). Returns `(id, stratum)` pairs
/// sorted by id.
pub fn stratified_sample(items: &[(String, f64)], sizes: &[usize], seed: u64) -> Vec<(String, usize)> {
    let mut sorted: Vec<&(String, f64)> = items.iter().collect();
    sorted.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(&b.0)));
    let k = sizes.len().max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for (s, &want) in sizes.iter().enumerate() {
        let lo = s * sorted.len() / k;
        let hi = (s + 1) * sorted.len() / k;
        let mut stratum: Vec<&String> = sorted[lo..hi].iter().map(|(id, _)| id).collect();
        stratum.shuffle(&mut rng);
        out.extend(stratum.into_iter().take(want).map(|id| (id.clone(), s)));
    }
    out.sort();
    out
}
