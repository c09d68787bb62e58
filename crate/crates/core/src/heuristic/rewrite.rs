use regex::Regex;

use crate::text::{is_invisible, is_punctuation};

/// Maps U+00A0 and U+3000 to a plain space and deletes invisible (format
/// category) characters. Everything else passes through unchanged.
pub fn normalize_characters(text: &str) -> String {
    text.chars()
        .filter_map(|c| match c {
            '\u{00A0}' | '\u{3000}' => Some(' '),
            c if is_invisible(c) => None,
            c => Some(c),
        })
        .collect()
}

/// Keeps the lines from the first to the last line containing punctuation.
/// A first line of more than three words is kept regardless.
pub fn trim_effective_lines(text: &str) -> String {
    let lines: Vec<&str> = text.split('\n').collect();
    let has_punct = |l: &str| l.chars().any(is_punctuation);
    let first_long = lines.first().is_some_and(|l| l.split_whitespace().count() > 3);

    let first_punct = lines.iter().position(|l| has_punct(l));
    let last_punct = lines.iter().rposition(|l| has_punct(l));
    let (start, end) = match (first_punct, last_punct) {
        (Some(f), Some(l)) => (if first_long { 0 } else { f }, l),
        _ if first_long => (0, 0),
        _ => return String::new(),
    };
    lines[start..=end].join("\n")
}

/// Removes pattern phrases inside lines and deletes unwanted lines.
pub struct LineScrubber {
    patterns: Option<Regex>,
    blocklist: Vec<String>,
}

impl LineScrubber {
    pub fn new(patterns: &[String], line_blocklist: &[String]) -> Self {
        let patterns = (!patterns.is_empty()).then(|| {
            let alt = patterns.iter().map(|p| regex::escape(p)).collect::<Vec<_>>().join("|");
            Regex::new(&format!("(?i){alt}")).expect("escaped patterns compile")
        });
        LineScrubber { patterns, blocklist: line_blocklist.iter().map(|s| s.to_lowercase()).collect() }
    }

    fn strip_patterns(&self, line: &str) -> String {
        let Some(re) = &self.patterns else { return line.to_owned() };
        let mut current = line.to_owned();
        // Removing one occurrence can join the halves of another.
        loop {
            let next = re.replace_all(&current, "").into_owned();
            if next == current {
                return current;
            }
            current = next;
        }
    }

    fn delete_line(&self, line: &str) -> bool {
        if !line.is_empty() && line.chars().all(char::is_whitespace) {
            return true;
        }
        let lower = line.to_lowercase();
        self.blocklist.iter().any(|b| lower.contains(b.as_str()))
    }

    pub fn scrub(&self, text: &str) -> String {
        text.split('\n')
            .map(|l| self.strip_patterns(l))
            .filter(|l| !self.delete_line(l))
            .collect::<Vec<_>>()
            .join("\n")
    }
}

impl Default for LineScrubber {
    fn default() -> Self {
        let cfg = super::HeuristicConfig::default();
        LineScrubber::new(&cfg.scrub_patterns, &cfg.line_blocklist)
    }
}

/// Scrubs with the default pattern and line lists.
pub fn scrub_lines(text: &str) -> String {
    LineScrubber::default().scrub(text)
}
