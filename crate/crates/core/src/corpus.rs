//! Record model and the line-delimited JSON record format shared by every stage.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use flate2::read::MultiGzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::quality::QualityAnnotations;
use crate::safety::SafetyAnnotations;

/// Processing stage a document has reached. Ordering follows the pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    #[default]
    Raw,
    Clean,
    Dedup,
    Safe,
    HighQuality,
}

impl Stage {
    pub const ALL: [Stage; 5] = [Stage::Raw, Stage::Clean, Stage::Dedup, Stage::Safe, Stage::HighQuality];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Raw => "raw",
            Stage::Clean => "clean",
            Stage::Dedup => "dedup",
            Stage::Safe => "safe",
            Stage::HighQuality => "high_quality",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One web-text record.
///
/// `dump_id` labels are zero-padded `YYYY-WW`, so string order is recency
/// order. Fields this crate does not know about are kept in `extra` and
/// written back unchanged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    #[serde(rename = "dump")]
    pub dump_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub url: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fetched_at: Option<DateTime<Utc>>,
    #[serde(rename = "lang", default, skip_serializing_if = "Option::is_none")]
    pub language: Option<String>,
    pub text: String,
    #[serde(default)]
    pub stage: Stage,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub safety: Option<SafetyAnnotations>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quality: Option<QualityAnnotations>,
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

impl Document {
    pub fn new(id: impl Into<String>, dump_id: impl Into<String>, text: impl Into<String>) -> Self {
        Document {
            id: id.into(),
            dump_id: dump_id.into(),
            url: None,
            fetched_at: None,
            language: None,
            text: text.into(),
            stage: Stage::Raw,
            safety: None,
            quality: None,
            extra: Map::new(),
        }
    }

    pub fn with_url(mut self, url: impl Into<String>) -> Self {
        self.url = Some(url.into());
        self
    }

    /// Moves the document forward. Stages never go backwards.
    pub fn advance(&mut self, stage: Stage) {
        debug_assert!(stage >= self.stage, "stage regression {} -> {}", self.stage, stage);
        if stage > self.stage {
            self.stage = stage;
        }
    }

    /// Attaches a drop decision for the rejects stream.
    pub fn into_reject(mut self, outcome: &FilterOutcome) -> Self {
        let value = serde_json::to_value(outcome).expect("outcome serializes");
        self.extra.insert("outcome".to_owned(), value);
        self
    }

    /// Reads back the outcome attached by [`Document::into_reject`].
    pub fn reject_outcome(&self) -> Option<FilterOutcome> {
        self.extra.get("outcome").and_then(|v| serde_json::from_value(v.clone()).ok())
    }
}

/// Keep/drop decision with the rule that fired and the values it compared.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterOutcome {
    kept: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rule_id: Option<String>,
    #[serde(default)]
    diagnostics: BTreeMap<String, f64>,
}

impl FilterOutcome {
    pub fn keep() -> Self {
        FilterOutcome { kept: true, rule_id: None, diagnostics: BTreeMap::new() }
    }

    pub fn drop(rule_id: impl Into<String>) -> Self {
        FilterOutcome { kept: false, rule_id: Some(rule_id.into()), diagnostics: BTreeMap::new() }
    }

    pub fn kept(&self) -> bool {
        self.kept
    }

    pub fn rule_id(&self) -> Option<&str> {
        self.rule_id.as_deref()
    }

    pub fn diagnostics(&self) -> &BTreeMap<String, f64> {
        &self.diagnostics
    }

    /// Records a diagnostic value. Non-finite values are not representable
    /// in JSON and are skipped.
    pub fn set_diagnostic(&mut self, name: impl Into<String>, value: f64) {
        if value.is_finite() {
            self.diagnostics.insert(name.into(), value);
        }
    }

    pub fn with_diagnostic(mut self, name: impl Into<String>, value: f64) -> Self {
        self.set_diagnostic(name, value);
        self
    }
}

/// Per-stage counters plus the two rates derived from them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageStats {
    pub stage: String,
    pub documents: u64,
    pub bytes: u64,
    pub tokens: u64,
    #[serde(default)]
    pub relative_removal_rate: f64,
    #[serde(default)]
    pub absolute_retention_rate: f64,
}

impl StageStats {
    /// Counts documents, UTF-8 bytes of text and tokens. Rates are filled in
    /// by the retention report.
    pub fn measure<'a, I>(stage: impl Into<String>, docs: I, tokenizer: &dyn crate::text::Tokenizer) -> Self
    where
        I: IntoIterator<Item = &'a Document>,
    {
        let mut stats = StageStats {
            stage: stage.into(),
            documents: 0,
            bytes: 0,
            tokens: 0,
            relative_removal_rate: 0.0,
            absolute_retention_rate: 0.0,
        };
        for doc in docs {
            stats.documents += 1;
            stats.bytes += doc.text.len() as u64;
            stats.tokens += tokenizer.count_tokens(&doc.text) as u64;
        }
        stats
    }
}

#[derive(Debug, Error)]
pub enum RecordError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
}

impl RecordError {
    pub fn is_fatal(&self) -> bool {
        matches!(self, RecordError::Io { .. })
    }
}

const GZIP_MAGIC: [u8; 2] = [0x1f, 0x8b];

/// Opens a file for reading, transparently decompressing gzip (detected by
/// magic bytes, not by extension).
pub fn open_maybe_gzip(path: &Path) -> io::Result<Box<dyn BufRead + Send>> {
    let mut file = BufReader::new(File::open(path)?);
    let head = file.fill_buf()?;
    if head.starts_with(&GZIP_MAGIC) {
        Ok(Box::new(BufReader::new(MultiGzDecoder::new(file))))
    } else {
        Ok(Box::new(file))
    }
}

/// Streaming reader over a record file.
///
/// Malformed lines yield [`RecordError::Malformed`] and iteration continues;
/// an IO error is yielded once and ends the stream.
pub struct RecordReader {
    path: PathBuf,
    lines: io::Lines<Box<dyn BufRead + Send>>,
    line_no: usize,
    done: bool,
}

impl Iterator for RecordReader {
    type Item = Result<Document, RecordError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        loop {
            let line = match self.lines.next()? {
                Ok(line) => line,
                Err(source) => {
                    self.done = true;
                    return Some(Err(RecordError::Io { path: self.path.clone(), source }));
                }
            };
            self.line_no += 1;
            if line.trim().is_empty() {
                continue;
            }
            return Some(serde_json::from_str(&line).map_err(|e| RecordError::Malformed {
                line: self.line_no,
                message: e.to_string(),
            }));
        }
    }
}

pub fn read_records(path: impl AsRef<Path>) -> Result<RecordReader, RecordError> {
    let path = path.as_ref().to_path_buf();
    let reader = open_maybe_gzip(&path).map_err(|source| RecordError::Io { path: path.clone(), source })?;
    Ok(RecordReader { path, lines: reader.lines(), line_no: 0, done: false })
}

/// Reads a whole record file, splitting good records from per-line errors.
pub fn read_all(path: impl AsRef<Path>) -> Result<(Vec<Document>, Vec<RecordError>), RecordError> {
    let mut docs = Vec::new();
    let mut errors = Vec::new();
    for item in read_records(path)? {
        match item {
            Ok(doc) => docs.push(doc),
            Err(e) if e.is_fatal() => return Err(e),
            Err(e) => errors.push(e),
        }
    }
    Ok((docs, errors))
}

fn partial_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".partial");
    path.with_file_name(name)
}

/// Writes any serializable records as JSON lines, atomically: data goes to a
/// `.partial` sibling that is renamed into place on success and removed on
/// failure. Paths ending in `.gz` are gzip-compressed.
pub fn write_jsonl<T, I>(records: I, path: impl AsRef<Path>) -> Result<usize, RecordError>
where
    T: Serialize,
    I: IntoIterator<Item = T>,
{
    let path = path.as_ref();
    let tmp = partial_path(path);
    let io_err = |source| RecordError::Io { path: path.to_path_buf(), source };

    let result = (|| -> io::Result<usize> {
        let file = File::create(&tmp)?;
        let gz = path.extension().is_some_and(|e| e == "gz");
        let mut out: Box<dyn Write> = if gz {
            Box::new(GzEncoder::new(BufWriter::new(file), Compression::default()))
        } else {
            Box::new(BufWriter::new(file))
        };
        let mut count = 0;
        for record in records {
            serde_json::to_writer(&mut out, &record)?;
            out.write_all(b"\n")?;
            count += 1;
        }
        out.flush()?;
        drop(out);
        fs::rename(&tmp, path)?;
        Ok(count)
    })();

    result.map_err(|e| {
        let _ = fs::remove_file(&tmp);
        io_err(e)
    })
}

pub fn write_records<'a, I>(docs: I, path: impl AsRef<Path>) -> Result<usize, RecordError>
where
    I: IntoIterator<Item = &'a Document>,
{
    write_jsonl(docs, path)
}

/// Reads any deserializable JSON-lines file (gzip-aware). Blank lines are skipped.
pub fn read_jsonl<T: serde::de::DeserializeOwned>(path: impl AsRef<Path>) -> Result<Vec<T>, RecordError> {
    let path = path.as_ref();
    let mut reader = open_maybe_gzip(path).map_err(|source| RecordError::Io { path: path.to_path_buf(), source })?;
    let mut buf = String::new();
    reader
        .read_to_string(&mut buf)
        .map_err(|source| RecordError::Io { path: path.to_path_buf(), source })?;
    let mut out = Vec::new();
    for (i, line) in buf.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(line)
                .map_err(|e| RecordError::Malformed { line: i + 1, message: e.to_string() })?,
        );
    }
    Ok(out)
}
