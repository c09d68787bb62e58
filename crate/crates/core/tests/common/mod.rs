#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};

use chrono::{TimeZone, Utc};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use refinery::pipeline::PipelineConfig;
use refinery::warc::{write_record, WarcRecord};

const NOUNS: &[&str] = &[
    "river", "garden", "teacher", "market", "village", "window", "kitchen", "harbor", "library", "forest",
    "engine", "bridge", "letter", "farmer", "museum", "station", "painter", "island", "doctor", "mountain",
    "student", "council", "bakery", "theater", "journey", "meadow", "company", "neighbor", "festival", "valley",
];
const VERBS: &[&str] = &[
    "visited", "repaired", "described", "painted", "opened", "carried", "watched", "followed", "cleaned",
    "measured", "remembered", "discovered", "borrowed", "explained", "finished", "protected", "planted",
];
const ADJS: &[&str] = &[
    "quiet", "old", "bright", "careful", "small", "famous", "narrow", "gentle", "busy", "ancient", "modern",
    "friendly", "patient", "distant", "local", "wooden", "crowded", "peaceful",
];
const PREPS: &[&str] = &["near", "beside", "behind", "under", "across", "after", "before", "with", "for", "around"];
const DETS: &[&str] = &["the", "a", "every", "one", "that", "this", "our", "their"];

fn pick<'a>(rng: &mut ChaCha8Rng, words: &[&'a str]) -> &'a str {
    words.choose(rng).expect("non-empty word list")
}

fn sentence(rng: &mut ChaCha8Rng) -> String {
    let s = format!(
        "{} {} {} {} {} {} {} {} {} {}",
        pick(rng, DETS),
        pick(rng, ADJS),
        pick(rng, NOUNS),
        pick(rng, VERBS),
        pick(rng, DETS),
        pick(rng, ADJS),
        pick(rng, NOUNS),
        pick(rng, PREPS),
        pick(rng, DETS),
        pick(rng, NOUNS)
    );
    let mut c = s.chars();
    let first = c.next().expect("non-empty").to_uppercase().collect::<String>();
    format!("{first}{}.", c.as_str())
}

/// Varied English prose that passes the default heuristic rules: `lines`
/// lines of two or three sentences each.
pub fn prose(seed: u64, lines: usize) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..lines)
        .map(|_| {
            let n = rng.random_range(2..=3);
            (0..n).map(|_| sentence(&mut rng)).collect::<Vec<_>>().join(" ")
        })
        .collect::<Vec<_>>()
        .join("\n")
}

pub fn html_page(title: &str, text: &str) -> Vec<u8> {
    let paras: String = text.lines().map(|l| format!("<p>{l}</p>\n")).collect();
    format!(
        "<html><head><title>{title}</title></head><body><nav><a href=\"/\">Home</a> <a href=\"/about\">About</a></nav>\
         <article>{paras}</article><footer><a href=\"/terms\">Terms</a></footer></body></html>"
    )
    .into_bytes()
}

/// What the 20-response fixture plants, by the stage that should remove it.
pub struct FixtureExpectation {
    pub crawl: u64,
    pub raw: u64,
    pub clean: u64,
    pub dedup: u64,
    pub safe: u64,
}

pub const FIXTURE_EXPECT: FixtureExpectation = FixtureExpectation { crawl: 20, raw: 19, clean: 17, dedup: 14, safe: 12 };

pub const BLOCKED_HOST: &str = "blocked.example";
pub const BLOCKED_WORD: &str = "zorblatt";
pub const FIXTURE_EMAIL: &str = "jane.doe@example.org";

/// Writes a 20-response WARC (plus one request record) into `dir`:
/// 12 distinct pages, 3 exact copies of earlier pages from a later crawl,
/// 2 pages failing heuristics, 1 page on a blocked domain, 1 page with a
/// blocked word and 1 non-200 response. Returns the WARC path.
pub fn write_fixture_warc(dir: &Path) -> PathBuf {
    let early = Utc.with_ymd_and_hms(2021, 3, 10, 12, 0, 0).unwrap();
    let late = Utc.with_ymd_and_hms(2023, 2, 8, 12, 0, 0).unwrap();
    let mut records = vec![WarcRecord::request("http://site0.example/", early)];
    let mut texts = Vec::new();
    for i in 0..12u64 {
        let mut text = prose(100 + i, 6);
        if i == 3 {
            text.push_str(&format!("\nWrite to the careful teacher at {FIXTURE_EMAIL} today."));
        }
        texts.push(text.clone());
        let uri = format!("http://site{i}.example/page");
        records.push(WarcRecord::html_response(&uri, early, 200, "text/html; charset=utf-8", &html_page("page", &text)));
    }
    for i in 0..3 {
        let uri = format!("http://mirror{i}.example/copy");
        records.push(WarcRecord::html_response(&uri, late, 200, "text/html", &html_page("copy", &texts[i])));
    }
    // An overlong token (R15) and a page whose lines all repeat (R9).
    let long_word = format!("{} Then the {} arrived.", prose(200, 5), "x".repeat(60));
    records.push(WarcRecord::html_response("http://bad0.example/", early, 200, "text/html", &html_page("bad", &long_word)));
    let line = prose(201, 1);
    let repeated = vec![line; 8].join("\n");
    records.push(WarcRecord::html_response("http://bad1.example/", early, 200, "text/html", &html_page("bad", &repeated)));
    let blocked = prose(300, 6);
    let uri = format!("http://www.{BLOCKED_HOST}/story");
    records.push(WarcRecord::html_response(&uri, early, 200, "text/html", &html_page("blocked", &blocked)));
    let worded = format!("{}\nOne quiet farmer said {BLOCKED_WORD} to our busy doctor.", prose(301, 6));
    records.push(WarcRecord::html_response("http://words.example/", early, 200, "text/html", &html_page("w", &worded)));
    records.push(WarcRecord::html_response("http://gone.example/", early, 404, "text/html", &html_page("gone", &prose(400, 6))));

    let path = dir.join("fixture.warc.gz");
    let mut out = fs::File::create(&path).expect("create warc");
    for r in &records {
        write_record(&mut out, r, true).expect("write warc record");
    }
    path
}

/// A full-pipeline config over the fixture, with block lists written to `dir`.
pub fn fixture_config(dir: &Path, warc: &Path, out: &Path) -> PipelineConfig {
    let domains = dir.join("domains.txt");
    let words = dir.join("words.txt");
    fs::write(&domains, format!("# blocked hosts\n{BLOCKED_HOST}\n")).unwrap();
    fs::write(&words, format!("{BLOCKED_WORD}\n")).unwrap();
    let mut cfg = PipelineConfig::default();
    cfg.run_id = Some("fixture".into());
    cfg.output_dir = out.to_path_buf();
    cfg.input.warc = vec![warc.to_path_buf()];
    cfg.safety.domains = Some(domains);
    cfg.safety.words = Some(words);
    cfg
}
