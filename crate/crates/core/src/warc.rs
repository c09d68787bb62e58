//! WARC 1.0/1.1 reader with per-record error recovery.
//!
//! Input may be plain or gzip-compressed (one member per record or one for
//! the whole file). A record whose `Content-Length` disagrees with the bytes
//! that follow is reported as an error and the reader resynchronizes on the
//! next `WARC/1.` version line.

use std::io::{self, BufRead, BufReader, Read, Write};

use chrono::{DateTime, Utc};
use flate2::read::MultiGzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;
use thiserror::Error;

const CHUNK: usize = 64 * 1024;
const VERSION_PREFIX: &[u8] = b"WARC/1.";

#[derive(Debug, Error)]
pub enum WarcError {
    #[error("input is not a WARC stream")]
    NotWarc,
    #[error("io error: {0}")]
    Io(#[from] io::Error),
    #[error("malformed record at byte {offset}: {message}")]
    Malformed { offset: u64, message: String },
}

impl WarcError {
    pub fn is_fatal(&self) -> bool {
        !matches!(self, WarcError::Malformed { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum WarcType {
    Response,
    Other(String),
}

impl WarcType {
    fn parse(s: &str) -> Self {
        if s.eq_ignore_ascii_case("response") {
            WarcType::Response
        } else {
            WarcType::Other(s.to_ascii_lowercase())
        }
    }

    fn as_str(&self) -> &str {
        match self {
            WarcType::Response => "response",
            WarcType::Other(s) => s,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WarcRecord {
    pub warc_type: WarcType,
    pub target_uri: String,
    pub record_id: Option<String>,
    pub warc_date: Option<DateTime<Utc>>,
    /// Parsed from the HTTP status line of response records; 0 otherwise.
    pub http_status: u16,
    /// The record block, exactly `Content-Length` bytes.
    pub body: Vec<u8>,
    pub headers: Vec<(String, String)>,
}

/// HTTP response carried in a `response` record block.
#[derive(Debug)]
pub struct HttpResponse<'a> {
    pub status: u16,
    pub headers: Vec<(String, String)>,
    pub payload: &'a [u8],
}

impl HttpResponse<'_> {
    pub fn header(&self, name: &str) -> Option<&str> {
        self.headers.iter().find(|(k, _)| k.eq_ignore_ascii_case(name)).map(|(_, v)| v.as_str())
    }
}

fn find(hay: &[u8], needle: &[u8]) -> Option<usize> {
    hay.windows(needle.len()).position(|w| w == needle)
}

fn parse_http(block: &[u8]) -> Option<HttpResponse<'_>> {
    let (head_end, sep) = match find(block, b"\r\n\r\n") {
        Some(i) => (i, 4),
        None => (find(block, b"\n\n")?, 2),
    };
    let head = std::str::from_utf8(&block[..head_end]).ok()?;
    let mut lines = head.lines();
    let status_line = lines.next()?;
    if !status_line.starts_with("HTTP/") {
        return None;
    }
    let status = status_line.split_whitespace().nth(1)?.parse().ok()?;
    let headers = lines
        .filter_map(|l| l.split_once(':'))
        .map(|(k, v)| (k.trim().to_owned(), v.trim().to_owned()))
        .collect();
    Some(HttpResponse { status, headers, payload: &block[head_end + sep..] })
}

impl WarcRecord {
    pub fn header(&self, name: &str) -> Option<&str> {
        self.headers.iter().find(|(k, _)| k.eq_ignore_ascii_case(name)).map(|(_, v)| v.as_str())
    }

    pub fn http(&self) -> Option<HttpResponse<'_>> {
        if self.warc_type != WarcType::Response {
            return None;
        }
        parse_http(&self.body)
    }

    /// Only successful HTML responses go on to text extraction.
    pub fn is_html_response(&self) -> bool {
        if self.warc_type != WarcType::Response || self.http_status != 200 {
            return false;
        }
        self.http()
            .and_then(|h| h.header("content-type").map(|ct| ct.to_ascii_lowercase()))
            .is_some_and(|ct| ct.contains("html"))
    }

    /// Builds a response record around an HTML payload.
    pub fn html_response(uri: &str, date: DateTime<Utc>, status: u16, content_type: &str, html: &[u8]) -> Self {
        let mut body = format!(
            "HTTP/1.1 {status} {}\r\nContent-Type: {content_type}\r\nContent-Length: {}\r\n\r\n",
            if status == 200 { "OK" } else { "Status" },
            html.len()
        )
        .into_bytes();
        body.extend_from_slice(html);
        WarcRecord {
            warc_type: WarcType::Response,
            target_uri: uri.to_owned(),
            record_id: None,
            warc_date: Some(date),
            http_status: status,
            body,
            headers: Vec::new(),
        }
    }

    pub fn request(uri: &str, date: DateTime<Utc>) -> Self {
        let host = url::Url::parse(uri).ok().and_then(|u| u.host_str().map(str::to_owned)).unwrap_or_default();
        WarcRecord {
            warc_type: WarcType::Other("request".into()),
            target_uri: uri.to_owned(),
            record_id: None,
            warc_date: Some(date),
            http_status: 0,
            body: format!("GET / HTTP/1.1\r\nHost: {host}\r\n\r\n").into_bytes(),
            headers: Vec::new(),
        }
    }
}

/// Serializes one record. With `gzip`, the record is its own gzip member.
pub fn write_record<W: Write>(out: &mut W, record: &WarcRecord, gzip: bool) -> io::Result<()> {
    let mut buf = Vec::with_capacity(record.body.len() + 256);
    buf.extend_from_slice(b"WARC/1.0\r\n");
    let mut header = |k: &str, v: &str| {
        buf.extend_from_slice(k.as_bytes());
        buf.extend_from_slice(b": ");
        buf.extend_from_slice(v.as_bytes());
        buf.extend_from_slice(b"\r\n");
    };
    header("WARC-Type", record.warc_type.as_str());
    header("WARC-Target-URI", &record.target_uri);
    if let Some(id) = &record.record_id {
        header("WARC-Record-ID", id);
    }
    if let Some(date) = record.warc_date {
        header("WARC-Date", &date.format("%Y-%m-%dT%H:%M:%SZ").to_string());
    }
    let content_type = match record.warc_type {
        WarcType::Response => "application/http; msgtype=response",
        _ => "application/http; msgtype=request",
    };
    header("Content-Type", content_type);
    header("Content-Length", &record.body.len().to_string());
    buf.extend_from_slice(b"\r\n");
    buf.extend_from_slice(&record.body);
    buf.extend_from_slice(b"\r\n\r\n");
    if gzip {
        let mut enc = GzEncoder::new(out, Compression::default());
        enc.write_all(&buf)?;
        enc.finish()?;
        Ok(())
    } else {
        out.write_all(&buf)
    }
}

/// Streaming WARC reader.
pub struct WarcReader<R> {
    inner: R,
    buf: Vec<u8>,
    pos: usize,
    /// Absolute stream offset of `buf[0]`.
    base: u64,
    eof: bool,
    started: bool,
    failed: bool,
}

/// Wraps a byte stream, decompressing it first if it starts with the gzip magic.
pub fn read_warc<R: Read + 'static>(reader: R) -> io::Result<WarcReader<Box<dyn Read>>> {
    let mut reader = BufReader::new(reader);
    let gz = reader.fill_buf()?.starts_with(&[0x1f, 0x8b]);
    let inner: Box<dyn Read> = if gz { Box::new(MultiGzDecoder::new(reader)) } else { Box::new(reader) };
    Ok(WarcReader::new(inner))
}

impl<R: Read> WarcReader<R> {
    pub fn new(inner: R) -> Self {
        WarcReader { inner, buf: Vec::new(), pos: 0, base: 0, eof: false, started: false, failed: false }
    }

    /// Bytes consumed from the (decompressed) stream so far.
    pub fn offset(&self) -> u64 {
        self.base + self.pos as u64
    }

    /// Ensures at least `need` unread bytes are buffered unless the stream ends.
    fn fill(&mut self, need: usize) -> io::Result<()> {
        while self.buf.len() - self.pos < need && !self.eof {
            let old = self.buf.len();
            self.buf.resize(old + CHUNK, 0);
            let n = loop {
                match self.inner.read(&mut self.buf[old..]) {
                    Ok(n) => break n,
                    Err(e) if e.kind() == io::ErrorKind::Interrupted => continue,
                    Err(e) => {
                        self.buf.truncate(old);
                        return Err(e);
                    }
                }
            };
            self.buf.truncate(old + n);
            if n == 0 {
                self.eof = true;
            }
        }
        Ok(())
    }

    fn compact(&mut self) {
        if self.pos > CHUNK {
            self.buf.drain(..self.pos);
            self.base += self.pos as u64;
            self.pos = 0;
        }
    }

    /// Reads one line (terminated by LF) starting at `pos`; returns it without
    /// the line terminator, or None at end of stream.
    fn read_line(&mut self) -> io::Result<Option<Vec<u8>>> {
        let mut scanned = 0;
        loop {
            if let Some(i) = self.buf[self.pos + scanned..].iter().position(|&b| b == b'\n') {
                let end = self.pos + scanned + i;
                let mut line = self.buf[self.pos..end].to_vec();
                if line.last() == Some(&b'\r') {
                    line.pop();
                }
                self.pos = end + 1;
                return Ok(Some(line));
            }
            scanned = self.buf.len() - self.pos;
            if self.eof {
                if scanned == 0 {
                    return Ok(None);
                }
                let line = self.buf[self.pos..].to_vec();
                self.pos = self.buf.len();
                return Ok(Some(line));
            }
            self.fill(scanned + CHUNK)?;
        }
    }

    /// Moves `pos` to the next `WARC/1.` line at or after `from`.
    fn resync(&mut self, from: usize) -> io::Result<()> {
        let mut search = from;
        loop {
            let hay = &self.buf[search..];
            let hit = hay
                .windows(VERSION_PREFIX.len() + 1)
                .position(|w| w[0] == b'\n' && &w[1..] == VERSION_PREFIX);
            if let Some(i) = hit {
                self.pos = search + i + 1;
                return Ok(());
            }
            if self.eof {
                self.pos = self.buf.len();
                return Ok(());
            }
            search = self.buf.len().saturating_sub(VERSION_PREFIX.len()).max(from);
            let have = self.buf.len() - self.pos;
            self.fill(have + CHUNK)?;
        }
    }

    fn next_record(&mut self) -> Result<Option<WarcRecord>, WarcError> {
        self.compact();
        let start;
        let version = loop {
            let line_start = self.pos;
            match self.read_line()? {
                None => return Ok(None),
                Some(l) if l.iter().all(u8::is_ascii_whitespace) => continue,
                Some(l) => {
                    start = line_start;
                    break l;
                }
            }
        };
        if !version.starts_with(VERSION_PREFIX) {
            if !self.started {
                return Err(WarcError::NotWarc);
            }
            let offset = self.base + start as u64;
            self.resync(start)?;
            return Err(WarcError::Malformed { offset, message: "expected WARC version line".into() });
        }
        self.started = true;

        let mut headers = Vec::new();
        loop {
            match self.read_line()? {
                None => {
                    return Err(WarcError::Malformed {
                        offset: self.base + start as u64,
                        message: "end of stream inside headers".into(),
                    })
                }
                Some(l) if l.is_empty() => break,
                Some(l) => {
                    let l = String::from_utf8_lossy(&l);
                    if let Some((k, v)) = l.split_once(':') {
                        headers.push((k.trim().to_owned(), v.trim().to_owned()));
                    }
                }
            }
        }
        let get = |name: &str| headers.iter().find(|(k, _)| k.eq_ignore_ascii_case(name)).map(|(_, v)| v.clone());

        let offset = self.base + start as u64;
        let Some(length) = get("Content-Length").and_then(|v| v.parse::<usize>().ok()) else {
            let body_start = self.pos;
            self.resync(body_start)?;
            return Err(WarcError::Malformed { offset, message: "missing or invalid Content-Length".into() });
        };

        let body_start = self.pos;
        self.fill(length + 4)?;
        let available = self.buf.len() - body_start;
        let trailer_ok = available >= length + 2 && {
            let t = &self.buf[body_start + length..(body_start + length + 4).min(self.buf.len())];
            t.starts_with(b"\r\n\r\n") || t == b"\r\n" || t.starts_with(b"\n\n") || t == b"\n"
        };
        if available < length || !trailer_ok {
            self.resync(body_start)?;
            let message = if available < length {
                format!("declared {length} bytes, stream ended after {available}")
            } else {
                format!("declared length {length} does not end at a record boundary")
            };
            return Err(WarcError::Malformed { offset, message });
        }
        let body = self.buf[body_start..body_start + length].to_vec();
        self.pos = body_start + length;

        let warc_type = WarcType::parse(&get("WARC-Type").unwrap_or_default());
        let warc_date = get("WARC-Date")
            .and_then(|d| DateTime::parse_from_rfc3339(&d).ok())
            .map(|d| d.with_timezone(&Utc));
        let mut record = WarcRecord {
            warc_type,
            target_uri: get("WARC-Target-URI").unwrap_or_default(),
            record_id: get("WARC-Record-ID"),
            warc_date,
            http_status: 0,
            body,
            headers,
        };
        if let Some(http) = record.http() {
            record.http_status = http.status;
        }
        Ok(Some(record))
    }
}

impl<R: Read> Iterator for WarcReader<R> {
    type Item = Result<WarcRecord, WarcError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed {
            return None;
        }
        match self.next_record() {
            Ok(Some(r)) => Some(Ok(r)),
            Ok(None) => None,
            Err(e) => {
                if e.is_fatal() {
                    self.failed = true;
                }
                Some(Err(e))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;

    fn date() -> DateTime<Utc> {
        Utc.with_ymd_and_hms(2023, 2, 7, 10, 0, 0).unwrap()
    }

    fn archive(records: &[WarcRecord], gzip: bool) -> Vec<u8> {
        let mut out = Vec::new();
        for r in records {
            write_record(&mut out, r, gzip).unwrap();
        }
        out
    }

    fn page(uri: &str) -> WarcRecord {
        WarcRecord::html_response(uri, date(), 200, "text/html; charset=utf-8", b"<p>Hi there.</p>")
    }

    #[test]
    fn single_response_record() {
        let bytes = archive(&[page("http://a.example/")], false);
        let recs: Vec<_> = WarcReader::new(&bytes[..]).collect::<Result<_, _>>().unwrap();
        assert_eq!(recs.len(), 1);
        assert_eq!(recs[0].target_uri, "http://a.example/");
        assert_eq!(recs[0].http_status, 200);
        assert_eq!(recs[0].warc_date, Some(date()));
        assert!(recs[0].is_html_response());
        assert_eq!(recs[0].http().unwrap().payload, b"<p>Hi there.</p>");
    }

    #[test]
    fn request_records_are_not_extracted() {
        let bytes = archive(&[WarcRecord::request("http://a.example/", date()), page("http://a.example/")], false);
        let recs: Vec<_> = WarcReader::new(&bytes[..]).collect::<Result<_, _>>().unwrap();
        assert_eq!(recs.len(), 2);
        let html: Vec<_> = recs.iter().filter(|r| r.is_html_response()).collect();
        assert_eq!(html.len(), 1);
        assert_eq!(html[0].warc_type, WarcType::Response);
    }

    #[test]
    fn non_200_and_non_html_are_skipped() {
        let r404 = WarcRecord::html_response("http://a/", date(), 404, "text/html", b"gone");
        let pdf = WarcRecord::html_response("http://a/x.pdf", date(), 200, "application/pdf", b"%PDF");
        assert!(!r404.is_html_response());
        assert!(!pdf.is_html_response());
    }

    #[test]
    fn gzip_per_record() {
        let bytes = archive(&[page("http://a/"), page("http://b/")], true);
        let recs: Vec<_> = read_warc(std::io::Cursor::new(bytes)).unwrap().collect::<Result<_, _>>().unwrap();
        assert_eq!(recs.iter().map(|r| r.target_uri.as_str()).collect::<Vec<_>>(), ["http://a/", "http://b/"]);
    }

    #[test]
    fn truncated_body_is_reported_and_next_record_parsed() {
        let first = archive(&[page("http://a/")], false);
        let second = archive(&[page("http://b/")], false);
        // Drop 5 bytes of the first body while keeping its declared length.
        let body_end = first.len() - 4;
        let mut corrupt = first[..body_end - 5].to_vec();
        corrupt.extend_from_slice(&first[body_end..]);
        corrupt.extend_from_slice(&second);

        let items: Vec<_> = WarcReader::new(&corrupt[..]).collect();
        assert_eq!(items.len(), 2);
        assert!(matches!(items[0], Err(WarcError::Malformed { offset: 0, .. })));
        assert_eq!(items[1].as_ref().unwrap().target_uri, "http://b/");
    }

    #[test]
    fn stream_ending_mid_body() {
        let mut bytes = archive(&[page("http://a/")], false);
        bytes.truncate(bytes.len() - 10);
        let items: Vec<_> = WarcReader::new(&bytes[..]).collect();
        assert_eq!(items.len(), 1);
        assert!(items[0].is_err());
    }

    #[test]
    fn non_warc_is_fatal() {
        let items: Vec<_> = WarcReader::new(&b"<html>not warc</html>\n"[..]).collect();
        assert_eq!(items.len(), 1);
        assert!(items[0].as_ref().unwrap_err().is_fatal());
    }

    #[test]
    fn large_body_spans_chunks() {
        let html = "<p>".to_string() + &"word ".repeat(40_000) + "</p>";
        let bytes = archive(&[WarcRecord::html_response("http://big/", date(), 200, "text/html", html.as_bytes()), page("http://a/")], false);
        let recs: Vec<_> = WarcReader::new(&bytes[..]).collect::<Result<_, _>>().unwrap();
        assert_eq!(recs.len(), 2);
        assert_eq!(recs[0].http().unwrap().payload.len(), html.len());
    }
}
