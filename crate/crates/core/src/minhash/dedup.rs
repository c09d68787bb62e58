use std::collections::{HashMap, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{estimate_jaccard, BandingPlan, MinHashError, MinHashSignature, UnionFind};

#[derive(Debug, Clone)]
pub struct DedupEntry {
    pub id: String,
    pub dump_id: String,
    pub signature: MinHashSignature,
}

/// A group of near-duplicates and the copy that is kept.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DupCluster {
    /// Sorted ascending.
    pub member_ids: Vec<String>,
    pub survivor_id: String,
}

impl DupCluster {
    pub fn len(&self) -> usize {
        self.member_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.member_ids.is_empty()
    }
}

/// Newest dump wins; ties go to the greatest id.
fn survivor<'a>(members: impl Iterator<Item = (&'a str, &'a str)>) -> &'a str {
    members.max_by(|a, b| a.1.cmp(b.1).then_with(|| a.0.cmp(b.0))).map(|(id, _)| id).expect("non-empty cluster")
}

fn clusters_from_groups(entries: &[(&str, &str)], groups: Vec<Vec<usize>>) -> Vec<DupCluster> {
    let mut clusters: Vec<DupCluster> = groups
        .into_iter()
        .map(|g| {
            let survivor_id = survivor(g.iter().map(|&i| entries[i])).to_owned();
            let mut member_ids: Vec<String> = g.iter().map(|&i| entries[i].0.to_owned()).collect();
            member_ids.sort();
            DupCluster { member_ids, survivor_id }
        })
        .collect();
    clusters.sort_by(|a, b| a.survivor_id.cmp(&b.survivor_id));
    clusters
}

/// Candidate pairs from one band: documents whose band slices are identical.
fn band_pairs(entries: &[DedupEntry], band: usize, rows: usize) -> Vec<(usize, usize)> {
    let range = band * rows..(band + 1) * rows;
    let mut buckets: HashMap<&[u64], Vec<usize>> = HashMap::new();
    for (i, e) in entries.iter().enumerate() {
        if e.signature.is_empty_set() {
            continue;
        }
        buckets.entry(&e.signature.values[range.clone()]).or_default().push(i);
    }
    let mut pairs = Vec::new();
    for members in buckets.values().filter(|m| m.len() > 1) {
        for (k, &a) in members.iter().enumerate() {
            for &b in &members[k + 1..] {
                pairs.push((a, b));
            }
        }
    }
    pairs
}

/// Clusters near-duplicates.
///
/// Each band is bucketed independently (in parallel); documents sharing a
/// bucket become candidate pairs, candidates whose estimated Jaccard reaches
/// the plan threshold are merged transitively, and each cluster keeps its
/// newest member. Every input appears in exactly one cluster. The result does
/// not depend on input order or thread count.
pub fn dedup(entries: &[DedupEntry], plan: &BandingPlan) -> Result<Vec<DupCluster>, MinHashError> {
    let num_perm = entries.first().map_or(0, |e| e.signature.num_perm());
    if let Some(bad) = entries.iter().find(|e| e.signature.num_perm() != num_perm) {
        return Err(MinHashError::LengthMismatch(num_perm, bad.signature.num_perm()));
    }
    if !entries.is_empty() && plan.bands * plan.rows > num_perm {
        return Err(MinHashError::InvalidPlan { bands: plan.bands, rows: plan.rows, num_perm });
    }

    let mut candidates: Vec<(usize, usize)> =
        (0..plan.bands).into_par_iter().flat_map_iter(|band| band_pairs(entries, band, plan.rows)).collect();
    candidates.par_sort_unstable();
    candidates.dedup();

    let verified: Vec<(usize, usize)> = candidates
        .into_par_iter()
        .filter(|&(a, b)| {
            estimate_jaccard(&entries[a].signature, &entries[b].signature).is_ok_and(|j| j >= plan.threshold)
        })
        .collect();

    let mut uf = UnionFind::new(entries.len());
    for (a, b) in verified {
        uf.union(a, b);
    }
    let keys: Vec<(&str, &str)> = entries.iter().map(|e| (e.id.as_str(), e.dump_id.as_str())).collect();
    Ok(clusters_from_groups(&keys, uf.groups()))
}

/// Reference clustering from exact all-pairs Jaccard over shingle sets.
/// Quadratic; intended for small corpora and tests.
pub fn brute_force_clusters(docs: &[(String, String, HashSet<String>)], threshold: f64) -> Vec<DupCluster> {
    let mut uf = UnionFind::new(docs.len());
    for i in 0..docs.len() {
        for j in i + 1..docs.len() {
            let (a, b) = (&docs[i].2, &docs[j].2);
            if a.is_empty() || b.is_empty() {
                continue;
            }
            let inter = a.intersection(b).count();
            let union = a.len() + b.len() - inter;
            if inter as f64 / union as f64 >= threshold {
                uf.union(i, j);
            }
        }
    }
    let keys: Vec<(&str, &str)> = docs.iter().map(|d| (d.0.as_str(), d.1.as_str())).collect();
    clusters_from_groups(&keys, uf.groups())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::minhash::{optimal_bands, MinHasher};

    fn entry(h: &MinHasher, id: &str, dump: &str, text: &str) -> DedupEntry {
        DedupEntry { id: id.into(), dump_id: dump.into(), signature: h.signature_of_text(text, 5) }
    }

    fn long_text(seed: usize, words: usize) -> String {
        (0..words).map(|i| format!("w{}x{}", seed, i)).collect::<Vec<_>>().join(" ")
    }

    #[test]
    fn identical_docs_keep_newest_dump() {
        let h = MinHasher::new(128, 1);
        let text = long_text(0, 60);
        let entries = vec![entry(&h, "old", "2019-35", &text), entry(&h, "new", "2023-06", &text)];
        let clusters = dedup(&entries, &optimal_bands(128, 0.7)).unwrap();
        assert_eq!(clusters.len(), 1);
        assert_eq!(clusters[0].survivor_id, "new");
        assert_eq!(clusters[0].member_ids, vec!["new", "old"]);
    }

    #[test]
    fn dump_tie_breaks_on_id() {
        let h = MinHasher::new(128, 1);
        let text = long_text(1, 40);
        let entries = vec![entry(&h, "b", "2020-10", &text), entry(&h, "a", "2020-10", &text)];
        let clusters = dedup(&entries, &optimal_bands(128, 0.7)).unwrap();
        assert_eq!(clusters[0].survivor_id, "b");
    }

    #[test]
    fn singletons_stay_single() {
        let h = MinHasher::new(128, 1);
        let entries: Vec<_> = (0..10).map(|i| entry(&h, &format!("d{i}"), "2021-01", &long_text(i, 50))).collect();
        let clusters = dedup(&entries, &optimal_bands(128, 0.7)).unwrap();
        assert_eq!(clusters.len(), 10);
        assert!(clusters.iter().all(|c| c.len() == 1));
    }

    #[test]
    fn empty_texts_never_merge() {
        let h = MinHasher::new(128, 1);
        let entries = vec![entry(&h, "a", "2020-01", ""), entry(&h, "b", "2020-01", "")];
        assert_eq!(dedup(&entries, &optimal_bands(128, 0.7)).unwrap().len(), 2);
    }

    #[test]
    fn mixed_lengths_rejected() {
        let a = DedupEntry { id: "a".into(), dump_id: "x".into(), signature: MinHashSignature { values: vec![0; 128] } };
        let b = DedupEntry { id: "b".into(), dump_id: "x".into(), signature: MinHashSignature { values: vec![0; 64] } };
        assert!(dedup(&[a, b], &optimal_bands(128, 0.7)).is_err());
    }
}
