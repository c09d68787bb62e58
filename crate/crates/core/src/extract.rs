//! Main-content extraction from HTML by text density.
//!
//! Every block-level element owns the text of its inline descendants (text
//! inside nested blocks belongs to the nested block). A block scores
//! `text_len / (1 + inline_markup + link_text_len)`; blocks scoring above a
//! fraction of the best block survive and become output lines in document
//! order.

use ego_tree::NodeRef;
use encoding_rs::Encoding;
use regex::bytes::Regex;
use scraper::{Html, Node};
use std::sync::OnceLock;

/// Pluggable main-content extractor.
pub trait TextExtractor: Send + Sync {
    fn extract(&self, html: &str) -> String;
}

#[derive(Debug, Clone, Copy)]
pub struct DensityExtractor {
    /// Blocks must score above `threshold * max_score`.
    pub threshold: f64,
}

impl Default for DensityExtractor {
    fn default() -> Self {
        DensityExtractor { threshold: 0.2 }
    }
}

const DROPPED: &[&str] = &[
    "script", "style", "noscript", "template", "head", "nav", "header", "footer", "form", "iframe", "svg", "button",
    "select", "textarea", "object", "embed", "canvas",
];

const BLOCKS: &[&str] = &[
    "html", "body", "main", "article", "section", "div", "aside", "p", "h1", "h2", "h3", "h4", "h5", "h6", "li", "ul",
    "ol", "dl", "dt", "dd", "table", "thead", "tbody", "tfoot", "tr", "td", "th", "caption", "blockquote", "pre",
    "figure", "figcaption", "address", "center", "details", "summary", "hr",
];

#[derive(Default)]
struct Block {
    text: String,
    link_chars: usize,
    markup: usize,
}

struct Walker {
    blocks: Vec<Block>,
    stack: Vec<usize>,
    link_depth: usize,
}

fn collapsed_len(s: &str) -> usize {
    s.split_whitespace().map(|w| w.chars().count() + 1).sum::<usize>().saturating_sub(1)
}

fn collapse_lines(s: &str) -> Vec<String> {
    s.split('\n')
        .map(|l| l.split_whitespace().collect::<Vec<_>>().join(" "))
        .filter(|l| !l.is_empty())
        .collect()
}

impl Walker {
    fn current(&mut self) -> &mut Block {
        let idx = *self.stack.last().expect("root block");
        &mut self.blocks[idx]
    }

    fn walk(&mut self, node: NodeRef<'_, Node>) {
        match node.value() {
            Node::Text(t) => {
                let text: &str = t;
                let in_link = self.link_depth > 0;
                let block = self.current();
                if in_link {
                    block.link_chars += collapsed_len(text);
                }
                block.text.push_str(text);
            }
            Node::Element(e) => {
                let name = e.name();
                if DROPPED.contains(&name) {
                    return;
                }
                if name == "br" {
                    self.current().text.push('\n');
                    return;
                }
                let is_block = BLOCKS.contains(&name);
                if is_block {
                    self.blocks.push(Block::default());
                    self.stack.push(self.blocks.len() - 1);
                    // A nested block interrupts the parent's text flow.
                    if self.stack.len() >= 2 {
                        let parent = self.stack[self.stack.len() - 2];
                        self.blocks[parent].text.push('\n');
                    }
                } else {
                    self.current().markup += 1;
                }
                let is_link = name == "a";
                if is_link {
                    self.link_depth += 1;
                }
                for child in node.children() {
                    self.walk(child);
                }
                if is_link {
                    self.link_depth -= 1;
                }
                if is_block {
                    self.stack.pop();
                }
            }
            Node::Document | Node::Fragment => {
                for child in node.children() {
                    self.walk(child);
                }
            }
            _ => {}
        }
    }
}

impl DensityExtractor {
    pub fn new(threshold: f64) -> Self {
        DensityExtractor { threshold }
    }
}

impl TextExtractor for DensityExtractor {
    fn extract(&self, html: &str) -> String {
        let doc = Html::parse_document(html);
        let mut walker = Walker { blocks: vec![Block::default()], stack: vec![0], link_depth: 0 };
        walker.walk(doc.tree.root());

        let scored: Vec<(f64, Vec<String>)> = walker
            .blocks
            .into_iter()
            .map(|b| {
                let lines = collapse_lines(&b.text);
                let len: usize = lines.iter().map(|l| l.chars().count()).sum();
                let score = len as f64 / (1.0 + b.markup as f64 + b.link_chars as f64);
                (score, lines)
            })
            .filter(|(_, lines)| !lines.is_empty())
            .collect();
        let max = scored.iter().map(|(s, _)| *s).fold(0.0, f64::max);
        if max <= 0.0 {
            return String::new();
        }
        let cut = self.threshold * max;
        scored
            .into_iter()
            .filter(|(s, _)| *s > cut)
            .flat_map(|(_, lines)| lines)
            .collect::<Vec<_>>()
            .join("\n")
    }
}

/// Extracts main text with the default density extractor.
pub fn extract_text(html: &[u8]) -> String {
    DensityExtractor::default().extract(&decode_html(html, None))
}

fn charset_param(content_type: &str) -> Option<&str> {
    content_type.split(';').skip(1).find_map(|p| {
        let (k, v) = p.split_once('=')?;
        k.trim().eq_ignore_ascii_case("charset").then(|| v.trim().trim_matches(|c| c == '"' || c == '\''))
    })
}

fn meta_charset(html: &[u8]) -> Option<String> {
    static RE: OnceLock<Regex> = OnceLock::new();
    let re = RE.get_or_init(|| Regex::new(r#"(?i)<meta[^>]*?charset\s*=\s*["']?\s*([A-Za-z0-9_:.\-]+)"#).unwrap());
    let head = &html[..html.len().min(4096)];
    re.captures(head).map(|c| String::from_utf8_lossy(&c[1]).into_owned())
}

/// Decodes an HTML payload: charset from the HTTP `Content-Type` header,
/// then from a `<meta>` tag, then UTF-8. Undecodable bytes become U+FFFD.
pub fn decode_html(bytes: &[u8], content_type: Option<&str>) -> String {
    let label = content_type.and_then(charset_param).map(str::to_owned).or_else(|| meta_charset(bytes));
    if let Some(enc) = label.and_then(|l| Encoding::for_label(l.as_bytes())) {
        let (text, _, _) = enc.decode(bytes);
        return text.into_owned();
    }
    String::from_utf8_lossy(bytes).into_owned()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_paragraph() {
        assert_eq!(extract_text(b"<html><body><p>Hello world.</p></body></html>"), "Hello world.");
    }

    #[test]
    fn script_is_removed_even_when_longer() {
        let html = format!(
            "<html><head><title>t</title></head><body><script>var x = '{}';</script><p>Short visible text.</p></body></html>",
            "a".repeat(500)
        );
        let out = extract_text(html.as_bytes());
        assert_eq!(out, "Short visible text.");
    }

    #[test]
    fn paragraphs_kept_link_sidebar_dropped() {
        let html = br#"<html><body>
            <div id="side"><ul>
              <li><a href="/">Home</a></li><li><a href="/news">News and updates</a></li>
              <li><a href="/about">About this website</a></li><li><a href="/c">Contact us today</a></li>
            </ul></div>
            <div id="main">
              <p>The river flooded the lower town after three days of heavy rain.</p>
              <p>Residents moved to the school on the hill, where volunteers served <b>hot</b> soup.</p>
              <p>Officials expect the water to recede by the end of the week.</p>
            </div>
            <footer>Copyright 2023</footer>
            </body></html>"#;
        let expected = "The river flooded the lower town after three days of heavy rain.\n\
                        Residents moved to the school on the hill, where volunteers served hot soup.\n\
                        Officials expect the water to recede by the end of the week.";
        assert_eq!(extract_text(html), expected);
    }

    #[test]
    fn entities_decoded_and_inline_flattened() {
        let out = extract_text(b"<p>Fish &amp; chips <i>are</i> &quot;great&quot;.</p>");
        assert_eq!(out, "Fish & chips are \"great\".");
    }

    #[test]
    fn empty_when_nothing_survives() {
        assert_eq!(extract_text(b"<html><body><script>x()</script></body></html>"), "");
    }

    #[test]
    fn charset_resolution_order() {
        // 0xE9 is 'é' in windows-1252 and invalid as UTF-8.
        let bytes = b"<p>caf\xe9 au lait</p>";
        assert_eq!(decode_html(bytes, Some("text/html; charset=windows-1252")), "<p>café au lait</p>");
        let meta = b"<meta charset=\"iso-8859-1\"><p>caf\xe9</p>";
        assert!(decode_html(meta, None).contains("café"));
        assert!(decode_html(bytes, None).contains('\u{FFFD}'));
    }

    #[test]
    fn idempotent_on_plain_text() {
        let once = extract_text(b"Plain text. More words here, nothing else.");
        let twice = extract_text(once.as_bytes());
        assert_eq!(once, twice);
    }
}
