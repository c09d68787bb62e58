use std::collections::HashSet;
use std::io;
use std::path::Path;

use aho_corasick::{AhoCorasick, AhoCorasickBuilder, MatchKind};
use serde::{Deserialize, Serialize};

/// Reads a one-entry-per-line list. Blank lines and `#` comments are skipped;
/// entries are trimmed and lowercased.
pub fn read_list(path: impl AsRef<Path>) -> io::Result<Vec<String>> {
    let text = std::fs::read_to_string(path)?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_lowercase)
        .collect())
}

/// Registrable-domain blocklist with dot-boundary suffix matching.
#[derive(Debug, Clone, Default)]
pub struct DomainBlocklist {
    domains: HashSet<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnparseableUrl;

impl DomainBlocklist {
    pub fn new<I, S>(domains: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let domains = domains
            .into_iter()
            .map(|d| d.as_ref().trim().trim_end_matches('.').to_lowercase())
            .filter(|d| !d.is_empty())
            .collect();
        DomainBlocklist { domains }
    }

    pub fn load(path: impl AsRef<Path>) -> io::Result<Self> {
        Ok(Self::new(read_list(path)?))
    }

    pub fn len(&self) -> usize {
        self.domains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.domains.is_empty()
    }

    /// True when the host equals a listed domain or is a subdomain of one.
    pub fn matches_host(&self, host: &str) -> bool {
        let host = host.trim_end_matches('.').to_lowercase();
        let mut rest = host.as_str();
        loop {
            if self.domains.contains(rest) {
                return true;
            }
            match rest.split_once('.') {
                Some((_, tail)) => rest = tail,
                None => return false,
            }
        }
    }

    pub fn matches_url(&self, url: &str) -> Result<bool, UnparseableUrl> {
        let parsed = url::Url::parse(url).map_err(|_| UnparseableUrl)?;
        let host = parsed.host_str().ok_or(UnparseableUrl)?;
        Ok(self.matches_host(host))
    }
}

/// Unparseable URLs never match.
pub fn match_domain(url: &str, blocklist: &DomainBlocklist) -> bool {
    blocklist.matches_url(url).unwrap_or(false)
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BlockwordHit {
    /// Byte offset in the original text.
    pub offset: usize,
    pub word: String,
}

/// Case-insensitive, word-bounded multi-pattern matcher over a lexicon of
/// lowercase words and phrases. One automaton pass per text.
#[derive(Debug, Clone)]
pub struct WordBlocklist {
    words: Vec<String>,
    automaton: Option<AhoCorasick>,
}

/// Lowercases `text`, returning the lowered string and, for each byte of it,
/// the byte offset of the originating character in `text` (plus one trailing
/// entry for the end).
fn lower_with_offsets(text: &str) -> (String, Vec<usize>) {
    let mut lowered = String::with_capacity(text.len());
    let mut map = Vec::with_capacity(text.len() + 1);
    for (i, c) in text.char_indices() {
        for lc in c.to_lowercase() {
            let before = lowered.len();
            lowered.push(lc);
            map.extend(std::iter::repeat_n(i, lowered.len() - before));
        }
    }
    map.push(text.len());
    (lowered, map)
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

fn bounded(text: &str, start: usize, end: usize) -> bool {
    let before = text[..start].chars().next_back().is_none_or(|c| !is_word_char(c));
    let after = text[end..].chars().next().is_none_or(|c| !is_word_char(c));
    before && after
}

impl WordBlocklist {
    pub fn new<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut words: Vec<String> =
            words.into_iter().map(|w| w.as_ref().trim().to_lowercase()).filter(|w| !w.is_empty()).collect();
        words.sort();
        words.dedup();
        let automaton = (!words.is_empty()).then(|| {
            AhoCorasickBuilder::new()
                .match_kind(MatchKind::Standard)
                .build(&words)
                .expect("lexicon automaton builds")
        });
        WordBlocklist { words, automaton }
    }

    pub fn load(path: impl AsRef<Path>) -> io::Result<Self> {
        Ok(Self::new(read_list(path)?))
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    /// All word-bounded hits, sorted by offset then word.
    pub fn find_all(&self, text: &str) -> Vec<BlockwordHit> {
        let Some(ac) = &self.automaton else { return Vec::new() };
        let (lowered, map) = lower_with_offsets(text);
        let mut hits: Vec<BlockwordHit> = ac
            .find_overlapping_iter(&lowered)
            .filter(|m| bounded(&lowered, m.start(), m.end()))
            .map(|m| BlockwordHit { offset: map[m.start()], word: self.words[m.pattern().as_usize()].clone() })
            .collect();
        hits.sort();
        hits
    }
}

pub fn match_blockwords(text: &str, lexicon: &WordBlocklist) -> Vec<BlockwordHit> {
    lexicon.find_all(text)
}
