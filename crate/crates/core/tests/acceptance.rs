//! Acceptance suite. Each criterion prints one PASS or FAIL line; the process
//! exits non-zero if any criterion fails.

mod common;

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use refinery::corpus::{Document, StageStats};
use refinery::heuristic::{compute_metrics, evaluate_rules, HeuristicConfig, RuleId};
use refinery::metrics::{auc, default_grid, exceedance_curve, retention_report, ScoreCurve};
use refinery::minhash::{dedup, estimate_jaccard, optimal_bands, banding_objective, DedupEntry, MinHasher};
use refinery::pipeline::{run, RunOptions};
use refinery::quality::{select_high_quality, QualityAnnotations, SelectionConfig};
use refinery::safety::{
    mask_pii, safety_gate_all, DomainBlocklist, FnScorer, PiiRegistry, SafetyGate, SafetyThresholds, WordBlocklist,
};
use refinery::text::WhitespaceTokenizer;

type Check = fn() -> Result<(), String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn main() {
    let criteria: &[(&str, Duration, Check)] = &[
        ("rule fidelity R1-R18", Duration::from_secs(1), rule_fidelity),
        ("minhash estimator", Duration::from_secs(30), minhash_estimator),
        ("dedup oracle equivalence", Duration::from_secs(60), dedup_oracle),
        ("banding plan", Duration::from_secs(5), banding_plan),
        ("auc", Duration::from_secs(5), auc_oracle),
        ("pii masking", Duration::from_secs(5), pii_masking),
        ("safety gate accounting", Duration::from_secs(30), safety_accounting),
        ("quality selection", Duration::from_secs(30), quality_selection),
        ("retention report", Duration::from_secs(60), retention),
        ("end-to-end determinism and shard invariance", Duration::from_secs(60), end_to_end),
        ("exceedance law", Duration::from_secs(5), exceedance_law),
    ];
    let mut failed = 0;
    for (name, limit, check) in criteria {
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or(p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        let elapsed = start.elapsed();
        let result = result.and_then(|_| ensure(elapsed <= *limit, || format!("took {elapsed:?}, limit {limit:?}")));
        match result {
            Ok(()) => println!("PASS {name} ({:.2}s)", elapsed.as_secs_f64()),
            Err(e) => {
                failed += 1;
                println!("FAIL {name} ({:.2}s): {e}", elapsed.as_secs_f64());
            }
        }
    }
    println!("{} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

// ---------------------------------------------------------------- rules

/// Distinct lowercase pseudo-words of `len` letters, starting after `skip`.
fn pseudo_words(n: usize, len: usize, skip: usize) -> Vec<String> {
    const C: &[u8] = b"bcdfghjklmnprstvwz";
    const V: &[u8] = b"aeiou";
    (skip..skip + n)
        .map(|mut i| {
            let mut w = String::new();
            for k in 0..len {
                let alphabet = if k % 2 == 0 { C } else { V };
                w.push(alphabet[i % alphabet.len()] as char);
                i /= alphabet.len();
            }
            w
        })
        .collect()
}

fn lines_of(words: &[String], per_line: usize, terminal: &str) -> String {
    words.chunks(per_line).map(|c| format!("{}{terminal}", c.join(" "))).collect::<Vec<_>>().join("\n")
}

/// Sixty distinct words with two stop words, as six ten-word sentences.
fn base_doc() -> String {
    let mut w = pseudo_words(58, 5, 0);
    w.insert(3, "the".into());
    w.insert(25, "and".into());
    lines_of(&w, 10, ".")
}

fn failing(text: &str) -> BTreeSet<RuleId> {
    let cfg = HeuristicConfig::default();
    evaluate_rules(&compute_metrics(text), text, &cfg).into_iter().filter(|v| v.failed).map(|v| v.rule).collect()
}

struct RulePair {
    rule: RuleId,
    boundary: &'static str,
    pass: String,
    fail: String,
    /// Other rules that unavoidably flip with the target.
    co_flips: &'static [RuleId],
}

fn rule_pairs() -> Vec<RulePair> {
    use RuleId::*;
    let base = base_doc();
    let mut pairs = Vec::new();
    let mut pair = |rule, boundary, pass: String, fail: String, co_flips| {
        pairs.push(RulePair { rule, boundary, pass, fail, co_flips })
    };

    // R1: a run of '-' ties the most frequent letter; ties go to the lower code point.
    let mut freq: HashMap<char, usize> = HashMap::new();
    base.chars().filter(|c| c.is_alphabetic()).for_each(|c| *freq.entry(c).or_default() += 1);
    let top = *freq.values().max().unwrap();
    pair(R1, "dash count = top letter count", format!("{base}\n{}", "-".repeat(top - 1)), format!("{base}\n{}", "-".repeat(top)), &[]);

    // R2: 46 letters against 100 vs 101 digits.
    let letters = "abcdefghij klmnopqrst uvwxyzabcd efghijklmn opqrst";
    let digits = |last: &str| {
        let mut d = vec!["1234567890"; 9];
        d.push(last);
        d.join(" ")
    };
    pair(R2, "letter/digit 0.46", format!("{letters} {}", digits("1234567890")), format!("{letters} {}", digits("12345678901")), &[]);

    // R3: top word share at 30% for 500 words and 7.5% for 600 words.
    let with_the = |n: usize, k: usize| {
        let filler = pseudo_words(n, 5, 0);
        let words: Vec<String> = (0..n)
            .map(|i| if (i * k) / n != ((i + 1) * k) / n { "the".into() } else { filler[i].clone() })
            .collect();
        lines_of(&words, 10, ".")
    };
    pair(R3, "150 vs 151 of 500 words", with_the(500, 150), with_the(500, 151), &[]);
    pair(R3, "45 vs 46 of 600 words", with_the(600, 45), with_the(600, 46), &[]);

    // R4: 50 vs 49 words.
    let words_doc = |n: usize| {
        let mut w = pseudo_words(n - 2, 5, 0);
        w.insert(0, "the".into());
        w.insert(5, "and".into());
        lines_of(&w, 10, ".")
    };
    pair(R4, "50 vs 49 words", words_doc(50), words_doc(49), &[]);

    // R5: 40 vs 39 of 50 words contain a letter.
    let alpha_doc = |alpha: usize| {
        let mut w = pseudo_words(alpha, 5, 0);
        w[0] = "the".into();
        w[1] = "and".into();
        w.extend((0..50 - alpha).map(|i| format!("{}", 1000 + i)));
        lines_of(&w, 10, ".")
    };
    pair(R5, "0.80 letter-word fraction", alpha_doc(40), alpha_doc(39), &[]);

    // R6: two vs one stop word.
    let mut two = pseudo_words(60, 5, 0);
    two[3] = "the".into();
    two[25] = "and".into();
    let mut one = two.clone();
    one[25] = pseudo_words(1, 5, 500)[0].clone();
    pair(R6, "2 vs 1 stop words", lines_of(&two, 10, "."), lines_of(&one, 10, "."), &[]);

    // R7: mean word length 3.0 vs 2.98, and 10.0 vs 10.02 (no punctuation).
    let mut short = pseudo_words(50, 3, 0);
    short[0] = "the".into();
    short[1] = "and".into();
    let mut shorter = short.clone();
    shorter[10] = "ab".into();
    pair(R7, "mean length 3.0", lines_of(&short, 10, ""), lines_of(&shorter, 10, ""), &[]);
    let long = pseudo_words(50, 10, 0);
    let mut longer = long.clone();
    longer[10].push('x');
    pair(R7, "mean length 10.0", lines_of(&long, 10, ""), lines_of(&longer, 10, ""), &[]);

    // R8: third-longest line 20 vs 19 characters; three vs two lines.
    let w = pseudo_words(40, 5, 0);
    let head = format!("the {}\nand {}", w[..19].join(" "), w[19..38].join(" "));
    pair(R8, "third line 20 chars", format!("{head}\nabcde fghij klmnopqr"), format!("{head}\nabcde fghij klmnopq"), &[]);
    pair(R8, "3 vs 2 lines", format!("{head}\nabcde fghij klmnopqr"), head.clone(), &[]);

    // R9: repeated lines cover 30% of line characters vs just over.
    let uniq = pseudo_words(30, 3, 0);
    let dup = "zyzyzyzyzyzyzyzyzyzy";
    let dup_doc = |last_short: bool| {
        let mut lines: Vec<String> = uniq.chunks(5).map(|c| format!("{} {}", c[..4].join(" "), c[4].clone() + "x")).collect();
        if last_short {
            lines[5].pop();
        }
        for at in [1, 3, 5, 7] {
            lines.insert(at, dup.into());
        }
        lines.join("\n")
    };
    pair(R9, "duplicate lines 30%", dup_doc(false), dup_doc(true), &[]);

    // R10: 60 vs 61 '#' symbols over 50 words.
    let sym_doc = |doubles: usize| {
        let mut w: Vec<String> = pseudo_words(50, 5, 0)
            .into_iter()
            .enumerate()
            .map(|(i, w)| if i < doubles { format!("##{w}") } else { format!("#{w}") })
            .collect();
        w[20] = "#the".into();
        w[30] = "#and".into();
        lines_of(&w, 10, ".")
    };
    pair(R10, "symbol/word 1.2", sym_doc(10), sym_doc(11), &[]);

    // R11: one visible character vs separators only.
    // A single visible word also trips R3 (one word is 100% of the text) and
    // the empty word list makes R5 fail, so both flip along with R11.
    pair(R11, "separators only", " \n\t x".into(), " \n\t ".into(), &[R3, R5]);

    // R12: newline runs of 7 vs 8.
    let mut halves = base.splitn(4, '\n');
    let (a, b, c) = (halves.next().unwrap(), halves.next().unwrap(), halves.next().unwrap());
    let rest = halves.next().unwrap();
    let gap = |n: usize| format!("{a}\n{b}\n{c}{}{rest}", "\n".repeat(n));
    pair(R12, "newline run 8", gap(7), gap(8), &[]);

    // R13: newlines are 25% of characters vs one more newline.
    let mut w = pseudo_words(60, 3, 0);
    w[0] = "the".into();
    w[1] = "and".into();
    let nl: String = w.iter().map(|x| format!("{x}\n")).collect();
    pair(R13, "newline fraction 0.25", nl.clone(), format!("{nl}\n"), &[]);

    // R14: one replacement character.
    pair(R14, "decoding error", format!("{base}e"), format!("{base}\u{FFFD}"), &[]);

    // R15: 45 vs 46 character word.
    pair(R15, "word length 45", format!("{base}\n{}", "a".repeat(45)), format!("{base}\n{}", "a".repeat(46)), &[]);

    // R16: 56 vs 57 word sentence.
    let sentence = |n: usize| format!("{base}\n{}.", pseudo_words(n, 5, 1000).join(" "));
    pair(R16, "sentence of 56 words", sentence(56), sentence(57), &[]);

    // R17: terminal colon.
    pair(R17, "colon-terminal", format!("{base} end."), format!("{base} end:"), &[]);

    // R18: image URL.
    pair(
        R18,
        "image url",
        format!("{base} http://cdn.example/a/photo.txt"),
        format!("{base} http://cdn.example/a/photo.png"),
        &[],
    );
    pairs
}

fn rule_fidelity() -> Result<(), String> {
    ensure(failing(&base_doc()).is_empty(), || format!("base document fails {:?}", failing(&base_doc())))?;
    let pairs = rule_pairs();
    let covered: BTreeSet<RuleId> = pairs.iter().map(|p| p.rule).collect();
    ensure(covered.len() == 18, || format!("only {} rules covered", covered.len()))?;
    let mut errors = Vec::new();
    for p in &pairs {
        let (fp, ff) = (failing(&p.pass), failing(&p.fail));
        if fp.contains(&p.rule) || !ff.contains(&p.rule) {
            errors.push(format!("{} ({}): pass fails={} fail fails={}", p.rule, p.boundary, fp.contains(&p.rule), ff.contains(&p.rule)));
            continue;
        }
        let flipped: BTreeSet<RuleId> = fp.symmetric_difference(&ff).copied().collect();
        let expected: BTreeSet<RuleId> = std::iter::once(p.rule).chain(p.co_flips.iter().copied()).collect();
        if flipped != expected {
            errors.push(format!("{} ({}): flipped {:?}", p.rule, p.boundary, flipped));
        }
    }
    ensure(errors.is_empty(), || errors.join("; "))?;
    println!("  {} golden pass/fail fixtures over 18 rules", 2 * pairs.len());
    Ok(())
}

// ---------------------------------------------------------------- minhash

fn minhash_estimator() -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let hasher = MinHasher::new(128, 1);
    let (mut within, mut bias) = (0usize, 0.0);
    for pair in 0..1000 {
        let union: usize = rng.random_range(100..=400);
        let j_target: f64 = rng.random_range(0.05..0.95);
        let inter = ((j_target * union as f64).round() as usize).max(1);
        let only_a = (union - inter) / 2;
        let only_b = union - inter - only_a;
        let shared: Vec<String> = (0..inter).map(|k| format!("p{pair}-s{k}")).collect();
        let a: Vec<String> = shared.iter().cloned().chain((0..only_a).map(|k| format!("p{pair}-a{k}"))).collect();
        let b: Vec<String> = shared.iter().cloned().chain((0..only_b).map(|k| format!("p{pair}-b{k}"))).collect();
        let exact = inter as f64 / union as f64;
        let est = estimate_jaccard(&hasher.signature(&a), &hasher.signature(&b)).map_err(|e| e.to_string())?;
        if (est - exact).abs() <= 4.0 * (exact * (1.0 - exact) / 128.0).sqrt() {
            within += 1;
        }
        bias += est - exact;
    }
    let bias = bias / 1000.0;
    println!("  {within}/1000 within 4 sigma, mean bias {bias:+.4}");
    ensure(within >= 990, || format!("only {within}/1000 within bound"))?;
    ensure(bias.abs() <= 0.02, || format!("mean bias {bias}"))
}

struct PlantedCorpus {
    docs: Vec<(String, String, String)>,
    clusters: Vec<Vec<usize>>,
}

fn random_word(rng: &mut ChaCha8Rng) -> String {
    (0..7).map(|_| (b'a' + rng.random_range(0..26)) as char).collect()
}

/// 200 documents: planted clusters of single-word edits of a 400-word base,
/// distractors sharing a prefix with a cluster base, and unrelated documents.
fn planted_corpus(seed: u64) -> PlantedCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dumps = ["2019-10", "2020-22", "2021-31", "2022-05", "2023-14"];
    let mut texts: Vec<Vec<String>> = Vec::new();
    let mut clusters = Vec::new();
    let fresh = |rng: &mut ChaCha8Rng, n: usize| (0..n).map(|_| random_word(rng)).collect::<Vec<_>>();
    for _ in 0..30 {
        let base = fresh(&mut rng, 400);
        let size = rng.random_range(2..=4);
        let mut members = vec![texts.len()];
        texts.push(base.clone());
        for v in 1..size {
            let mut edit = base.clone();
            edit[v * 90] = random_word(&mut rng);
            members.push(texts.len());
            texts.push(edit);
        }
        clusters.push(members);
        if rng.random_bool(0.5) {
            let mut distractor = base[..150].to_vec();
            distractor.extend(fresh(&mut rng, 250));
            texts.push(distractor);
        }
    }
    while texts.len() < 200 {
        let n = rng.random_range(50..400);
        texts.push(fresh(&mut rng, n));
    }
    let mut order: Vec<usize> = (0..texts.len()).collect();
    order.shuffle(&mut rng);
    let position: HashMap<usize, usize> = order.iter().enumerate().map(|(pos, &orig)| (orig, pos)).collect();
    let docs = order
        .iter()
        .map(|&orig| {
            let id = format!("doc{:03}", position[&orig]);
            (id, dumps[rng.random_range(0..dumps.len())].to_string(), texts[orig].join(" "))
        })
        .collect();
    let clusters = clusters.into_iter().map(|c| c.into_iter().map(|i| position[&i]).collect()).collect();
    PlantedCorpus { docs, clusters }
}

/// Word 5-gram shingles of each text, interned to integers and sorted.
fn shingle_ids(texts: &[&str]) -> Vec<Vec<u32>> {
    let mut intern: HashMap<String, u32> = HashMap::new();
    texts
        .iter()
        .map(|t| {
            let words: Vec<&str> = t.split_whitespace().collect();
            let mut ids: Vec<u32> = words
                .windows(5)
                .map(|w| {
                    let next = intern.len() as u32;
                    *intern.entry(w.join(" ")).or_insert(next)
                })
                .collect();
            ids.sort_unstable();
            ids.dedup();
            ids
        })
        .collect()
}

fn jaccard(a: &[u32], b: &[u32]) -> f64 {
    let (mut i, mut j, mut inter) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                inter += 1;
                i += 1;
                j += 1;
            }
        }
    }
    inter as f64 / (a.len() + b.len() - inter) as f64
}

/// Exact Jaccard for every pair (i < j).
fn all_pairs(docs: &[(String, String, String)]) -> Vec<(usize, usize, f64)> {
    let texts: Vec<&str> = docs.iter().map(|d| d.2.as_str()).collect();
    let sets = shingle_ids(&texts);
    let mut out = Vec::new();
    for i in 0..sets.len() {
        for j in i + 1..sets.len() {
            out.push((i, j, jaccard(&sets[i], &sets[j])));
        }
    }
    out
}

/// Transitive closure of pairs at `threshold`; newest dump (then greatest
/// id) survives. Returns (sorted members, survivor) per cluster.
fn oracle_clusters(docs: &[(String, String, String)], pairs: &[(usize, usize, f64)], threshold: f64) -> BTreeSet<(Vec<String>, String)> {
    let mut label: Vec<usize> = (0..docs.len()).collect();
    for &(i, j, jac) in pairs {
        if jac >= threshold {
            let (from, to) = (label[j], label[i]);
            if from != to {
                label.iter_mut().filter(|l| **l == from).for_each(|l| *l = to);
            }
        }
    }
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, l) in label.iter().enumerate() {
        groups.entry(*l).or_default().push(i);
    }
    groups
        .into_values()
        .map(|g| {
            let mut ids: Vec<String> = g.iter().map(|&i| docs[i].0.clone()).collect();
            ids.sort();
            let best = g.iter().max_by(|&&a, &&b| docs[a].1.cmp(&docs[b].1).then(docs[a].0.cmp(&docs[b].0))).unwrap();
            (ids, docs[*best].0.clone())
        })
        .collect()
}

fn dedup_oracle() -> Result<(), String> {
    let hasher = MinHasher::new(128, 1);
    let plan = optimal_bands(128, 0.7);
    let mut planted_total = 0;
    for seed in 0..20 {
        let corpus = planted_corpus(seed);
        let pairs = all_pairs(&corpus.docs);
        let mut cluster_of = vec![usize::MAX; corpus.docs.len()];
        for (c, members) in corpus.clusters.iter().enumerate() {
            members.iter().for_each(|&m| cluster_of[m] = c);
        }
        for &(i, j, jac) in &pairs {
            let same = cluster_of[i] != usize::MAX && cluster_of[i] == cluster_of[j];
            ensure(if same { jac >= 0.85 } else { jac <= 0.5 }, || {
                format!("seed {seed}: planted pair ({i},{j}) has J={jac}")
            })?;
        }
        planted_total += corpus.clusters.len();

        let entries: Vec<DedupEntry> = corpus
            .docs
            .iter()
            .map(|(id, dump, text)| DedupEntry {
                id: id.clone(),
                dump_id: dump.clone(),
                signature: hasher.signature_of_text(text, 5),
            })
            .collect();
        let got: BTreeSet<(Vec<String>, String)> = dedup(&entries, &plan)
            .map_err(|e| e.to_string())?
            .into_iter()
            .map(|c| (c.member_ids, c.survivor_id))
            .collect();
        let want = oracle_clusters(&corpus.docs, &pairs, 0.7);
        ensure(got == want, || {
            let diff: Vec<_> = got.symmetric_difference(&want).take(3).collect();
            format!("seed {seed}: clusters differ, e.g. {diff:?}")
        })?;

        // Survivor rule per planted cluster.
        let dump_of: HashMap<&str, &str> = corpus.docs.iter().map(|d| (d.0.as_str(), d.1.as_str())).collect();
        for (members, survivor) in got.iter().filter(|c| c.0.len() > 1) {
            let newest = members.iter().map(|m| dump_of[m.as_str()]).max().unwrap();
            ensure(dump_of[survivor.as_str()] == newest, || format!("seed {seed}: survivor {survivor} not newest"))?;
        }
        ensure(got.iter().filter(|c| c.0.len() > 1).count() == corpus.clusters.len(), || {
            format!("seed {seed}: expected {} clusters", corpus.clusters.len())
        })?;
    }
    println!("  {planted_total} planted clusters over 20 seeds match the all-pairs oracle");
    Ok(())
}

fn banding_plan() -> Result<(), String> {
    let golden: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(golden_path("optimal_bands_128_0.7.json")).unwrap()).unwrap();
    let plan = optimal_bands(128, 0.7);
    ensure(
        plan.bands as u64 == golden["bands"].as_u64().unwrap() && plan.rows as u64 == golden["rows"].as_u64().unwrap(),
        || format!("got ({}, {}), oracle {golden}", plan.bands, plan.rows),
    )?;
    let chosen = banding_objective(plan.bands, plan.rows, 0.7, 0.5, 0.5);
    let oracle = golden["objective"].as_f64().unwrap();
    ensure((chosen - oracle).abs() < 1e-9, || format!("objective {chosen} vs oracle {oracle}"))?;
    let mut checked = 0;
    for b in 1..=128 {
        for r in 1..=128 / b {
            let other = banding_objective(b, r, 0.7, 0.5, 0.5);
            ensure(chosen <= other, || format!("({b}, {r}) has objective {other} < {chosen}"))?;
            checked += 1;
        }
    }
    println!("  (b, r) = ({}, {}), objective {chosen:.6}, {checked} plans enumerated", plan.bands, plan.rows);
    Ok(())
}

fn golden_path(name: &str) -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)
}

// ---------------------------------------------------------------- auc

/// Independent trapezoid: rectangle under the lower endpoint plus the triangle.
fn trapezoid(t: &[f64], p: &[f64]) -> f64 {
    let mut area = 0.0;
    for i in 1..t.len() {
        let dt = t[i] - t[i - 1];
        area += p[i].min(p[i - 1]) * dt + (p[i] - p[i - 1]).abs() * dt * 0.5;
    }
    area
}

fn auc_oracle() -> Result<(), String> {
    let hand = ScoreCurve { thresholds: vec![0.0, 0.5, 1.0], percentages: vec![100.0, 50.0, 0.0] };
    let a = auc(&hand).map_err(|e| e.to_string())?;
    ensure(a == 50.0, || format!("hand case gives {a}"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for k in 0..100 {
        let n = rng.random_range(2..200);
        let mut t: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        t.sort_by(f64::total_cmp);
        t.dedup();
        let mut p: Vec<f64> = (0..t.len()).map(|_| 100.0 * rng.random::<f64>()).collect();
        p.sort_by(|a, b| b.total_cmp(a));
        let got = auc(&ScoreCurve { thresholds: t.clone(), percentages: p.clone() }).map_err(|e| e.to_string())?;
        let want = trapezoid(&t, &p);
        ensure((got - want).abs() <= 1e-9, || format!("curve {k}: {got} vs {want}"))?;
    }
    Ok(())
}

// ---------------------------------------------------------------- pii

fn pii_masking() -> Result<(), String> {
    let registry = PiiRegistry::default();
    let text = fs::read_to_string(golden_path("pii_cases.jsonl")).unwrap();
    let mut types = BTreeSet::new();
    let mut errors = Vec::new();
    let mut cases = 0;
    for line in text.lines() {
        let case: serde_json::Value = serde_json::from_str(line).unwrap();
        let (input, expected) = (case["input"].as_str().unwrap(), case["expected"].as_str().unwrap());
        let (masked, spans) = mask_pii(input, &registry);
        spans.iter().for_each(|s| {
            types.insert(s.pii_type.clone());
        });
        if masked != expected {
            errors.push(format!("{input:?} -> {masked:?}, expected {expected:?}"));
        }
        let (again, more) = mask_pii(&masked, &registry);
        if again != masked || !more.is_empty() {
            errors.push(format!("not idempotent on {masked:?}"));
        }
        cases += 1;
    }
    ensure(cases >= 50, || format!("only {cases} cases"))?;
    ensure(types.len() == 8, || format!("types covered: {types:?}"))?;
    ensure(errors.is_empty(), || errors.join("; "))?;
    println!("  {cases} cases over {} types", types.len());
    Ok(())
}

// ---------------------------------------------------------------- safety

fn safety_accounting() -> Result<(), String> {
    let n = 1000;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut pick = |k: usize| {
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut rng);
        idx[..k].iter().copied().collect::<HashSet<usize>>()
    };
    let (blocked, worded, toxic) = (pick(50), pick(30), pick(40));
    let docs: Vec<Document> = (0..n)
        .map(|i| {
            let mut text = common::prose(i as u64, 3);
            if worded.contains(&i) {
                text.push_str(" Then zorblatt happened.");
            }
            if toxic.contains(&i) {
                text.push_str(" STUBTOXIC");
            }
            let host = if blocked.contains(&i) { format!("www{i}.blocked.example") } else { format!("site{i}.example") };
            Document::new(format!("d{i:04}"), "2023-01", text).with_url(format!("https://{host}/p"))
        })
        .collect();
    let gate = SafetyGate {
        domains: DomainBlocklist::new(["blocked.example"]),
        words: WordBlocklist::new(["zorblatt"]),
        toxicity: Arc::new(FnScorer::new("stub-toxicity", |t: &str| Ok(if t.contains("STUBTOXIC") { 0.9 } else { 0.1 }))),
        pornography: Arc::new(FnScorer::new("stub-porn", |_: &str| Ok(0.0))),
        pii: PiiRegistry::default(),
        thresholds: SafetyThresholds { toxicity: 0.2, pornography: 0.2, fail_closed: false },
    };
    let (kept, rejected, report) = safety_gate_all(&gate, docs);
    for (check, want) in [("domain", 0.05), ("blockword", 0.03), ("toxicity", 0.04), ("pornography", 0.0)] {
        let got = report.fraction(check);
        ensure(got == want, || format!("{check}: reported {got}, planted {want}"))?;
    }
    let union = blocked.iter().chain(&worded).chain(&toxic).collect::<HashSet<_>>().len();
    ensure(rejected.len() == union && kept.len() == n - union, || {
        format!("discarded {} vs union of planted {union}", rejected.len())
    })?;
    ensure(report.discarded as usize == union, || "report discard count".into())
}

// ---------------------------------------------------------------- quality

fn quality_selection() -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let docs: Vec<Document> = (0..1000)
        .map(|i| {
            let words = rng.random_range(1..200);
            let mut d = Document::new(format!("q{i:04}"), "2023-01", vec!["w"; words].join(" "));
            d.quality = Some(QualityAnnotations {
                ad_score: Some(rng.random()),
                fluency_score: Some(rng.random()),
                ..Default::default()
            });
            d
        })
        .collect();
    let total: u64 = docs.iter().map(|d| d.text.split_whitespace().count() as u64).sum();
    let cfg = SelectionConfig::default();
    for k in 0..20 {
        let budget = total * k / 19;
        // Oracle: sort by 0.5*fluency + 0.5*(1 - ad) descending, id ascending; take the fitting prefix.
        let mut ranked: Vec<(f64, &str, u64)> = docs
            .iter()
            .map(|d| {
                let q = d.quality.as_ref().unwrap();
                let s = 0.5 * q.fluency_score.unwrap() + 0.5 * (1.0 - q.ad_score.unwrap());
                (s, d.id.as_str(), d.text.split_whitespace().count() as u64)
            })
            .collect();
        ranked.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(b.1)));
        let mut used = 0;
        let mut want = Vec::new();
        for (_, id, tokens) in &ranked {
            if used + tokens > budget {
                break;
            }
            used += tokens;
            want.push(id.to_string());
        }
        let sel = select_high_quality(docs.clone(), budget, &cfg, &WhitespaceTokenizer);
        let got: Vec<String> = sel.selected.iter().map(|d| d.id.clone()).collect();
        ensure(got == want, || format!("budget {budget}: selection differs from oracle"))?;
        ensure(sel.selected_tokens <= budget, || format!("budget {budget} exceeded"))?;
        ensure(sel.selected_tokens == used, || "token accounting".into())?;
        if let Some(next) = ranked.get(want.len()) {
            ensure(used + next.2 > budget, || format!("budget {budget}: next document would fit"))?;
        }
        ensure(sel.selected.len() + sel.rejected.len() == docs.len(), || "conservation".into())?;
    }
    Ok(())
}

// ---------------------------------------------------------------- retention and end to end

fn retention() -> Result<(), String> {
    let dir = tempfile::tempdir().unwrap();
    let warc = common::write_fixture_warc(dir.path());
    let cfg = common::fixture_config(dir.path(), &warc, &dir.path().join("runs"));
    let manifest = run(&cfg, &RunOptions::default()).map_err(|e| e.to_string())?;
    let report = retention_report(&manifest.stage_stats).map_err(|e| e.to_string())?;
    let mut product = 1.0;
    for row in &report.rows {
        product *= 1.0 - row.relative_removal_rate;
        ensure((product - row.absolute_retention_rate).abs() <= 1e-12, || {
            format!("{}: product {product} vs absolute {}", row.stage, row.absolute_retention_rate)
        })?;
    }
    let rendered = report.render();
    ensure(rendered.contains("removal vs previous %") && rendered.contains("retention vs initial %"), || {
        "rendered report lacks rate columns".into()
    })?;

    let stats = |n: u64, stage: &str| StageStats {
        stage: stage.into(),
        documents: n,
        bytes: 0,
        tokens: 0,
        relative_removal_rate: 0.0,
        absolute_retention_rate: 0.0,
    };
    let hand = retention_report(&[stats(1000, "raw"), stats(526, "clean")]).map_err(|e| e.to_string())?;
    let r = hand.rows[1].absolute_retention_rate;
    ensure((r - 0.526).abs() <= 1e-12, || format!("hand case retention {r}"))?;
    ensure(hand.render().contains("52.60"), || "hand case does not render 52.60%".into())?;
    println!("  stages: {}", report.rows.iter().map(|r| format!("{}={}", r.stage, r.documents)).collect::<Vec<_>>().join(" "));
    Ok(())
}

/// Every file of a run except the manifest (which records timings and paths).
fn run_files(run_dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![run_dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if p.file_name().unwrap() != "manifest.json" {
                out.insert(p.strip_prefix(run_dir).unwrap().display().to_string(), fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn end_to_end() -> Result<(), String> {
    let dir = tempfile::tempdir().unwrap();
    let warc = common::write_fixture_warc(dir.path());
    let mut outputs = Vec::new();
    for (label, shards) in [("s1", 1), ("s1-again", 1), ("s2", 2), ("s8", 8)] {
        let cfg = common::fixture_config(dir.path(), &warc, &dir.path().join(label));
        let m = run(&cfg, &RunOptions { shards: Some(shards), ..Default::default() }).map_err(|e| e.to_string())?;
        let mut prev_out = None;
        for s in &m.stages {
            ensure(s.input_count == s.output_count + s.reject_count, || format!("{label}: {} not conserved", s.name))?;
            if let Some(prev) = prev_out {
                ensure(s.input_count == prev, || format!("{label}: {} input differs from previous output", s.name))?;
            }
            prev_out = Some(s.output_count);
        }
        let e = &common::FIXTURE_EXPECT;
        let counts: Vec<u64> = m.stage_stats.iter().map(|s| s.documents).collect();
        ensure(counts[..5] == [e.crawl, e.raw, e.clean, e.dedup, e.safe], || format!("{label}: stage counts {counts:?}"))?;
        outputs.push((label, run_files(&dir.path().join(label).join("fixture"))));
    }
    let (first_label, first) = &outputs[0];
    for (label, files) in &outputs[1..] {
        ensure(files.keys().eq(first.keys()), || format!("{label}: file set differs from {first_label}"))?;
        for (name, bytes) in files {
            ensure(bytes == &first[name], || format!("{label}: {name} differs from {first_label}"))?;
        }
    }
    println!("  {} files byte-identical across reruns and shard counts 1, 2, 8", first.len());
    Ok(())
}

// ---------------------------------------------------------------- exceedance

fn exceedance_law() -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let scores: Vec<f64> = (0..10_000).map(|_| rng.random()).collect();
    let curve = exceedance_curve(&scores, &default_grid(101)).map_err(|e| e.to_string())?;
    let worst = curve
        .thresholds
        .iter()
        .zip(&curve.percentages)
        .map(|(t, p)| (p - 100.0 * (1.0 - t)).abs())
        .fold(0.0, f64::max);
    println!("  max deviation {worst:.3} points");
    ensure(worst <= 3.0, || format!("deviation {worst}"))
}
