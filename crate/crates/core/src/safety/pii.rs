//! Regex-based PII masking.
//!
//! A registry is an ordered list of PII types, each with an ordered list of
//! patterns. Types earlier in the registry claim text first; within a type the
//! leftmost, then longest, match wins. A pattern may define a capture group
//! named `pii`, in which case only that group is masked (useful for keyword
//! anchors such as "passport no.").

use std::path::Path;

use regex::{Regex, RegexBuilder};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Compiled-program size cap per pattern. Patterns exceeding it are skipped.
const PATTERN_SIZE_LIMIT: usize = 1 << 20;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PiiSpan {
    pub start: usize,
    pub end: usize,
    pub pii_type: String,
}

/// Extra acceptance test applied to a raw match.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Guard {
    /// Reject matches that sit inside a longer dotted number such as
    /// `1.2.3.4.5` (but allow a sentence-final period).
    DottedNumber,
}

impl Guard {
    fn accepts(self, text: &str, start: usize, end: usize) -> bool {
        match self {
            Guard::DottedNumber => {
                let mut before = text[..start].chars().rev();
                let mut after = text[end..].chars();
                let dotted_before = matches!((before.next(), before.next()), (Some('.'), Some(c)) if c.is_ascii_digit());
                let dotted_after = matches!((after.next(), after.next()), (Some('.'), Some(c)) if c.is_ascii_digit());
                !dotted_before && !dotted_after
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PiiTypeSpec {
    pub name: String,
    pub patterns: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub guard: Option<Guard>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PiiRegistrySpec {
    #[serde(default)]
    pub types: Vec<PiiTypeSpec>,
}

#[derive(Debug, Error)]
pub enum PiiConfigError {
    #[error("reading {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("parsing PII registry: {0}")]
    Parse(#[from] toml::de::Error),
}

#[derive(Debug, Clone)]
struct PiiType {
    name: String,
    patterns: Vec<Regex>,
    guard: Option<Guard>,
}

#[derive(Debug, Clone)]
pub struct PiiRegistry {
    types: Vec<PiiType>,
    pattern_errors: Vec<String>,
}

fn compile(pattern: &str) -> Result<Regex, regex::Error> {
    RegexBuilder::new(pattern).size_limit(PATTERN_SIZE_LIMIT).dfa_size_limit(PATTERN_SIZE_LIMIT).build()
}

impl PiiRegistry {
    /// Compiles a registry. Patterns that fail to compile (syntax errors or
    /// size budget exceeded) are skipped and listed in `pattern_errors`.
    pub fn from_spec(spec: &PiiRegistrySpec) -> Self {
        let mut pattern_errors = Vec::new();
        let types = spec
            .types
            .iter()
            .map(|t| PiiType {
                name: t.name.clone(),
                patterns: t
                    .patterns
                    .iter()
                    .filter_map(|p| match compile(p) {
                        Ok(re) => Some(re),
                        Err(e) => {
                            log::warn!("skipping {} pattern {p:?}: {e}", t.name);
                            pattern_errors.push(format!("{}: {e}", t.name));
                            None
                        }
                    })
                    .collect(),
                guard: t.guard,
            })
            .collect();
        PiiRegistry { types, pattern_errors }
    }

    pub fn from_toml(s: &str) -> Result<Self, PiiConfigError> {
        Ok(Self::from_spec(&toml::from_str(s)?))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, PiiConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|source| PiiConfigError::Io { path: path.display().to_string(), source })?;
        Self::from_toml(&text)
    }

    pub fn pattern_errors(&self) -> &[String] {
        &self.pattern_errors
    }

    pub fn type_names(&self) -> impl Iterator<Item = &str> {
        self.types.iter().map(|t| t.name.as_str())
    }

    /// Spans to mask, sorted by start, non-overlapping, in `text` coordinates.
    pub fn find_spans(&self, text: &str) -> Vec<PiiSpan> {
        let mut claimed: Vec<PiiSpan> = Vec::new();
        for ty in &self.types {
            let mut candidates: Vec<(usize, usize)> = Vec::new();
            for re in &ty.patterns {
                for caps in re.captures_iter(text) {
                    let m = caps.name("pii").unwrap_or_else(|| caps.get(0).expect("group 0"));
                    if m.start() < m.end() && ty.guard.is_none_or(|g| g.accepts(text, m.start(), m.end())) {
                        candidates.push((m.start(), m.end()));
                    }
                }
            }
            candidates.sort_by(|a, b| a.0.cmp(&b.0).then(b.1.cmp(&a.1)));
            for (start, end) in candidates {
                if claimed.iter().all(|s| end <= s.start || start >= s.end) {
                    claimed.push(PiiSpan { start, end, pii_type: ty.name.clone() });
                }
            }
        }
        claimed.sort();
        claimed
    }

    pub fn mask(&self, text: &str) -> (String, Vec<PiiSpan>) {
        let spans = self.find_spans(text);
        let mut out = String::with_capacity(text.len());
        let mut pos = 0;
        for s in &spans {
            out.push_str(&text[pos..s.start]);
            out.push_str(&mask_token(&s.pii_type));
            pos = s.end;
        }
        out.push_str(&text[pos..]);
        (out, spans)
    }
}

impl Default for PiiRegistry {
    fn default() -> Self {
        Self::from_spec(&default_spec())
    }
}

pub fn mask_token(pii_type: &str) -> String {
    format!("[[{pii_type}]]")
}

pub fn mask_pii(text: &str, registry: &PiiRegistry) -> (String, Vec<PiiSpan>) {
    registry.mask(text)
}

const OCTET: &str = "(?:25[0-5]|2[0-4][0-9]|1[0-9]{2}|[1-9]?[0-9])";

/// The built-in registry. Email and IPv4 are precise; the other types are
/// conservative, locale-agnostic starting points meant to be tuned per
/// deployment.
pub fn default_spec() -> PiiRegistrySpec {
    let t = |name: &str, patterns: Vec<String>, guard: Option<Guard>| PiiTypeSpec { name: name.into(), patterns, guard };
    PiiRegistrySpec {
        types: vec![
            t(
                "email",
                vec![r"[A-Za-z0-9._%+\-]+@[A-Za-z0-9\-]+(?:\.[A-Za-z0-9\-]+)*\.[A-Za-z]{2,}\b".into()],
                None,
            ),
            t("ip", vec![format!(r"\b{OCTET}(?:\.{OCTET}){{3}}\b")], Some(Guard::DottedNumber)),
            t(
                "gps",
                vec![concat!(
                    r"[-+]?\b(?:90\.0{3,}|[1-8]?[0-9]\.[0-9]{3,})",
                    r",[ ]?",
                    r"[-+]?\b(?:180\.0{3,}|(?:1[0-7][0-9]|[1-9]?[0-9])\.[0-9]{3,})\b"
                )
                .into()],
                None,
            ),
            t(
                "bank_account",
                vec![
                    r"\b[A-Z]{2}[0-9]{2}(?:[ ]?[A-Z0-9]{4}){3,7}(?:[ ]?[A-Z0-9]{1,3})?\b".into(),
                    r"\b[0-9]{4}(?:[ \-][0-9]{4}){3}\b".into(),
                ],
                None,
            ),
            t("id_card", vec![r"\b[0-9]{3}-[0-9]{2}-[0-9]{4}\b".into(), r"\b[1-9][0-9]{16}[0-9Xx]\b".into()], None),
            t(
                "passport",
                vec![r"(?i:passport)(?:[ ](?i:no\.?|number|#))?[ ]*[:#]?[ ]*(?P<pii>[A-Z]{0,2}[0-9]{6,9})\b".into()],
                None,
            ),
            t(
                "phone",
                vec![
                    r"\+[1-9][0-9]{7,14}\b".into(),
                    r"\+[1-9][0-9]{0,2}[ .\-]\(?[0-9]{2,4}\)?[ .\-][0-9]{3,4}[ .\-][0-9]{3,4}\b".into(),
                    r"(?:\([2-9][0-9]{2}\)[ ]?|\b[2-9][0-9]{2}[ .\-])[2-9][0-9]{2}[ .\-][0-9]{4}\b".into(),
                    r"\b1[3-9][0-9]{9}\b".into(),
                ],
                None,
            ),
            t(
                "address",
                vec![concat!(
                    r"\b[0-9]{1,5}[ ](?:[A-Z][a-z]+[ ]){1,3}",
                    r"(?:Street|St|Avenue|Ave|Road|Rd|Boulevard|Blvd|Lane|Ln|Drive|Dr|Court|Ct|Way|Place|Pl)\b"
                )
                .into()],
                None,
            ),
        ],
    }
}
