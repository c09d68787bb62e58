use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::blocklist::WordBlocklist;

#[derive(Debug, Error)]
pub enum ScorerError {
    #[error("scorer {name}: {message}")]
    Failed { name: String, message: String },
    #[error("scorer {name}: score {value} outside [0, 1]")]
    OutOfRange { name: String, value: f64 },
}

/// A scorer reply: one fraction, or named sub-scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScoreReply {
    Single(f64),
    Wrapped { score: f64 },
    Dimensions(BTreeMap<String, f64>),
}

impl ScoreReply {
    pub fn as_single(&self) -> Option<f64> {
        match self {
            ScoreReply::Single(v) | ScoreReply::Wrapped { score: v } => Some(*v),
            ScoreReply::Dimensions(_) => None,
        }
    }
}

/// A document classifier returning fractions in [0, 1]. Must be
/// deterministic for fixed state.
pub trait Scorer: Send + Sync {
    fn name(&self) -> &str;

    fn score_reply(&self, text: &str) -> Result<ScoreReply, ScorerError>;

    fn score(&self, text: &str) -> Result<f64, ScorerError> {
        let reply = self.score_reply(text)?;
        let value = reply.as_single().ok_or_else(|| ScorerError::Failed {
            name: self.name().to_owned(),
            message: "expected a single score".into(),
        })?;
        check_fraction(self.name(), value)
    }

    /// Concurrent requests this scorer accepts.
    fn max_in_flight(&self) -> usize {
        usize::MAX
    }
}

pub fn check_fraction(name: &str, value: f64) -> Result<f64, ScorerError> {
    if (0.0..=1.0).contains(&value) {
        Ok(value)
    } else {
        Err(ScorerError::OutOfRange { name: name.to_owned(), value })
    }
}

/// Hit-density baseline: `min(1, scale * hits / words)`.
#[derive(Debug, Clone)]
pub struct LexiconScorer {
    name: String,
    lexicon: WordBlocklist,
    scale: f64,
}

impl LexiconScorer {
    pub fn new(name: impl Into<String>, lexicon: WordBlocklist, scale: f64) -> Self {
        LexiconScorer { name: name.into(), lexicon, scale }
    }

    pub fn toxicity_baseline() -> Self {
        Self::new("toxicity-baseline", WordBlocklist::new(TOXIC_TERMS), 10.0)
    }

    pub fn pornography_baseline() -> Self {
        Self::new("pornography-baseline", WordBlocklist::new(PORN_TERMS), 10.0)
    }

    pub fn ad_baseline() -> Self {
        Self::new("ad-baseline", WordBlocklist::new(PROMO_PHRASES), 20.0)
    }

    pub fn density(&self, text: &str) -> f64 {
        let words = crate::text::words(text).count();
        if words == 0 {
            return 0.0;
        }
        let hits = self.lexicon.find_all(text).len();
        (self.scale * hits as f64 / words as f64).min(1.0)
    }
}

impl Scorer for LexiconScorer {
    fn name(&self) -> &str {
        &self.name
    }

    fn score_reply(&self, text: &str) -> Result<ScoreReply, ScorerError> {
        Ok(ScoreReply::Single(self.density(text)))
    }
}

const TOXIC_TERMS: &[&str] = &[
    "idiot", "idiots", "stupid", "moron", "morons", "dumb", "loser", "losers", "shut up", "hate you", "kill you",
    "pathetic", "worthless", "trash", "scum", "jerk", "fuck", "fucking", "shit", "bastard", "asshole", "damn",
    "crap", "bitch",
];

const PORN_TERMS: &[&str] = &[
    "porn", "porno", "xxx", "nsfw", "nude", "nudes", "naked", "camgirl", "webcam sex", "explicit sex", "hardcore",
    "erotic", "sex video", "adult video", "escort",
];

const PROMO_PHRASES: &[&str] = &[
    "buy now", "limited offer", "limited time", "click here", "order now", "free shipping", "discount", "best price",
    "special offer", "act now", "subscribe now", "sign up now", "sale", "coupon", "deal", "deals", "cheap",
    "promo code", "add to cart", "shop now",
];

/// In-process scorer backed by a closure.
pub struct FnScorer<F> {
    name: String,
    f: F,
}

impl<F> FnScorer<F>
where
    F: Fn(&str) -> Result<f64, String> + Send + Sync,
{
    pub fn new(name: impl Into<String>, f: F) -> Self {
        FnScorer { name: name.into(), f }
    }
}

impl<F> Scorer for FnScorer<F>
where
    F: Fn(&str) -> Result<f64, String> + Send + Sync,
{
    fn name(&self) -> &str {
        &self.name
    }

    fn score_reply(&self, text: &str) -> Result<ScoreReply, ScorerError> {
        (self.f)(text)
            .map(ScoreReply::Single)
            .map_err(|message| ScorerError::Failed { name: self.name.clone(), message })
    }
}

struct Worker {
    child: Child,
    stdin: ChildStdin,
    stdout: BufReader<ChildStdout>,
}

impl Worker {
    fn spawn(command: &str) -> std::io::Result<Self> {
        let mut child =
            Command::new("sh").arg("-c").arg(command).stdin(Stdio::piped()).stdout(Stdio::piped()).spawn()?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = BufReader::new(child.stdout.take().expect("piped stdout"));
        Ok(Worker { child, stdin, stdout })
    }

    fn request(&mut self, text: &str) -> Result<String, String> {
        let line = serde_json::to_string(&serde_json::json!({ "text": text })).map_err(|e| e.to_string())?;
        writeln!(self.stdin, "{line}").and_then(|_| self.stdin.flush()).map_err(|e| e.to_string())?;
        let mut reply = String::new();
        match self.stdout.read_line(&mut reply) {
            Ok(0) => Err("scorer process closed its output".into()),
            Ok(_) => Ok(reply),
            Err(e) => Err(e.to_string()),
        }
    }
}

impl Drop for Worker {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// Scorer running as a child process (`sh -c <command>`).
///
/// Protocol: one JSON object `{"text": ...}` per line on stdin; one reply
/// per line on stdout, either a bare number, `{"score": x}`, or an object of
/// named dimension scores. Each worker process handles one request at a time;
/// `instances` workers bound the in-flight count.
pub struct CommandScorer {
    name: String,
    command: String,
    workers: Vec<Mutex<Option<Worker>>>,
}

impl CommandScorer {
    pub fn new(name: impl Into<String>, command: impl Into<String>, instances: usize) -> Self {
        let workers = (0..instances.max(1)).map(|_| Mutex::new(None)).collect();
        CommandScorer { name: name.into(), command: command.into(), workers }
    }

    fn fail(&self, message: impl Into<String>) -> ScorerError {
        ScorerError::Failed { name: self.name.clone(), message: message.into() }
    }

    fn with_worker<T>(&self, f: impl FnOnce(&mut Worker) -> Result<T, String>) -> Result<T, ScorerError> {
        let slot = self
            .workers
            .iter()
            .find_map(|w| w.try_lock().ok())
            .unwrap_or_else(|| self.workers[0].lock().unwrap_or_else(|p| p.into_inner()));
        let mut slot = slot;
        if slot.is_none() {
            *slot = Some(Worker::spawn(&self.command).map_err(|e| self.fail(e.to_string()))?);
        }
        let result = f(slot.as_mut().expect("worker present"));
        if result.is_err() {
            // A failed exchange leaves the protocol out of sync; restart lazily.
            *slot = None;
        }
        result.map_err(|m| self.fail(m))
    }
}

impl Scorer for CommandScorer {
    fn name(&self) -> &str {
        &self.name
    }

    fn score_reply(&self, text: &str) -> Result<ScoreReply, ScorerError> {
        let line = self.with_worker(|w| w.request(text))?;
        serde_json::from_str(line.trim()).map_err(|e| self.fail(format!("bad reply {:?}: {e}", line.trim())))
    }

    fn max_in_flight(&self) -> usize {
        self.workers.len()
    }
}

/// Result of scoring one document against a threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreOutcome {
    pub score: Option<f64>,
    pub flagged: bool,
    pub failed: bool,
}

/// Scores `text`; flagged when the score strictly exceeds `threshold`.
/// Failures leave the score empty and flag only when `fail_closed`.
pub fn apply_scorer(text: &str, scorer: &dyn Scorer, threshold: f64, fail_closed: bool) -> ScoreOutcome {
    match scorer.score(text) {
        Ok(score) => ScoreOutcome { score: Some(score), flagged: score > threshold, failed: false },
        Err(e) => {
            log::warn!("{e}");
            ScoreOutcome { score: None, flagged: fail_closed, failed: true }
        }
    }
}
