//! Typo merging: fingerprint-key collisions and gated edit distance build merge
//! edges; connected components become canonical descriptors.

use std::collections::{BTreeMap, HashMap};

use serde::Serialize;

use super::text::{fingerprint_key, levenshtein_within};

/// Thresholds for the edit-distance half of the merge rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MergeConfig {
    pub max_distance: usize,
    pub min_length: usize,
}

impl Default for MergeConfig {
    fn default() -> Self {
        Self {
            max_distance: 1,
            min_length: 5,
        }
    }
}

/// A normalized form together with its aggregated raw count.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Variant {
    pub text: String,
    pub count: u64,
}

impl Variant {
    pub fn new(text: impl Into<String>, count: u64) -> Self {
        Self {
            text: text.into(),
            count,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MergeGroup {
    pub representative: String,
    /// Member variants, sorted by code point.
    pub variants: Vec<String>,
    pub total_count: u64,
}

/// Partition of the input variants. Groups are ordered by representative.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct MergeMap {
    pub groups: Vec<MergeGroup>,
}

impl MergeMap {
    /// Representative for a variant, if the variant was part of the input.
    pub fn representative_of(&self, variant: &str) -> Option<&str> {
        self.groups
            .iter()
            .find(|g| g.variants.iter().any(|v| v == variant))
            .map(|g| g.representative.as_str())
    }
}

pub(crate) struct UnionFind {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl UnionFind {
    pub(crate) fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            rank: vec![0; n],
        }
    }

    pub(crate) fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    pub(crate) fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            std::cmp::Ordering::Less => self.parent[ra] = rb,
            std::cmp::Ordering::Greater => self.parent[rb] = ra,
            std::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
    }
}

/// Deletion neighbourhood of `chars` up to `depth` deletions. Two strings within
/// edit distance `d` always share a key from their depth-`d` neighbourhoods.
fn deletion_keys(chars: &[char], depth: usize, out: &mut Vec<String>) {
    out.push(chars.iter().collect());
    if depth == 0 || chars.is_empty() {
        return;
    }
    for skip in 0..chars.len() {
        let shorter: Vec<char> = chars
            .iter()
            .enumerate()
            .filter_map(|(i, &c)| (i != skip).then_some(c))
            .collect();
        deletion_keys(&shorter, depth - 1, out);
    }
}

// Deletion neighbourhoods grow as length^depth; past this depth pairwise is cheaper.
const MAX_DELETION_DEPTH: usize = 2;

fn edit_distance_edges(variants: &[Variant], config: MergeConfig) -> Vec<(usize, usize)> {
    if config.max_distance == 0 {
        return Vec::new();
    }
    let chars: Vec<Vec<char>> = variants.iter().map(|v| v.text.chars().collect()).collect();
    let eligible: Vec<usize> = (0..variants.len())
        .filter(|&i| chars[i].len() >= config.min_length)
        .collect();
    let mut candidate_pairs: Vec<(usize, usize)> = Vec::new();

    if config.max_distance <= MAX_DELETION_DEPTH {
        let mut buckets: HashMap<String, Vec<usize>> = HashMap::new();
        let mut keys = Vec::new();
        for &i in &eligible {
            keys.clear();
            deletion_keys(&chars[i], config.max_distance, &mut keys);
            keys.sort_unstable();
            keys.dedup();
            for key in keys.drain(..) {
                buckets.entry(key).or_default().push(i);
            }
        }
        for members in buckets.values() {
            for (a, &i) in members.iter().enumerate() {
                for &j in &members[a + 1..] {
                    candidate_pairs.push((i.min(j), i.max(j)));
                }
            }
        }
        candidate_pairs.sort_unstable();
        candidate_pairs.dedup();
    } else {
        for (a, &i) in eligible.iter().enumerate() {
            for &j in &eligible[a + 1..] {
                candidate_pairs.push((i, j));
            }
        }
    }

    candidate_pairs
        .into_iter()
        .filter(|&(i, j)| levenshtein_within(&chars[i], &chars[j], config.max_distance).is_some())
        .collect()
}

/// Groups normalized variants into merge components.
///
/// An edge joins two variants when their fingerprint keys are equal, or when
/// both are at least `min_length` characters long and within `max_distance`
/// edits. Each component is represented by its most frequent variant, ties
/// going to the lexicographically smallest string.
pub fn merge_variants(variants: &[Variant], config: MergeConfig) -> MergeMap {
    let mut uf = UnionFind::new(variants.len());

    let mut by_key: HashMap<String, usize> = HashMap::new();
    for (i, v) in variants.iter().enumerate() {
        let key = fingerprint_key(&v.text);
        match by_key.get(&key) {
            Some(&first) => uf.union(first, i),
            None => {
                by_key.insert(key, i);
            }
        }
    }
    for (i, j) in edit_distance_edges(variants, config) {
        uf.union(i, j);
    }

    let mut components: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..variants.len() {
        let root = uf.find(i);
        components.entry(root).or_default().push(i);
    }

    let mut groups: Vec<MergeGroup> = components
        .into_values()
        .map(|members| {
            let best = members
                .iter()
                .copied()
                .max_by(|&a, &b| {
                    variants[a]
                        .count
                        .cmp(&variants[b].count)
                        .then_with(|| variants[b].text.cmp(&variants[a].text))
                })
                .expect("component is non-empty");
            let mut texts: Vec<String> = members.iter().map(|&i| variants[i].text.clone()).collect();
            texts.sort();
            MergeGroup {
                representative: variants[best].text.clone(),
                variants: texts,
                total_count: members.iter().map(|&i| variants[i].count).sum(),
            }
        })
        .collect();
    groups.sort_by(|a, b| a.representative.cmp(&b.representative));
    MergeMap { groups }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::text::levenshtein;
    use proptest::prelude::*;

    #[test]
    fn typo_merges_to_frequent_form() {
        let map = merge_variants(
            &[Variant::new("verkehr", 10), Variant::new("vekehr", 2)],
            MergeConfig::default(),
        );
        assert_eq!(map.groups.len(), 1);
        assert_eq!(map.groups[0].representative, "verkehr");
        assert_eq!(map.groups[0].total_count, 12);
        assert_eq!(map.representative_of("vekehr"), Some("verkehr"));
    }

    #[test]
    fn short_strings_are_gated() {
        let map = merge_variants(
            &[Variant::new("bau", 5), Variant::new("bad", 5)],
            MergeConfig::default(),
        );
        assert_eq!(map.groups.len(), 2);
    }

    #[test]
    fn singleton_is_its_own_representative() {
        let map = merge_variants(&[Variant::new("umwelt", 1)], MergeConfig::default());
        assert_eq!(map.groups.len(), 1);
        assert_eq!(map.groups[0].representative, "umwelt");
        assert_eq!(map.groups[0].variants, vec!["umwelt".to_string()]);
    }

    #[test]
    fn fingerprint_collision_ties_break_lexicographically() {
        let map = merge_variants(
            &[Variant::new("open data", 2), Variant::new("data open", 2)],
            MergeConfig::default(),
        );
        assert_eq!(map.groups.len(), 1);
        assert_eq!(map.groups[0].representative, "data open");
    }

    #[test]
    fn merges_chain_transitively() {
        // a-b and b-c are one edit apart, a-c two: still one component
        let map = merge_variants(
            &[
                Variant::new("abcdef", 1),
                Variant::new("abcdeg", 3),
                Variant::new("abcdhg", 1),
            ],
            MergeConfig::default(),
        );
        assert_eq!(map.groups.len(), 1);
        assert_eq!(map.groups[0].representative, "abcdeg");
    }

    #[test]
    fn zero_distance_disables_edit_merges() {
        let cfg = MergeConfig {
            max_distance: 0,
            min_length: 1,
        };
        let map = merge_variants(&[Variant::new("verkehr", 1), Variant::new("vekehr", 1)], cfg);
        assert_eq!(map.groups.len(), 2);
    }

    /// Exhaustive pairwise edge construction, for comparison with the
    /// deletion-neighbourhood candidate generator.
    fn brute_force_partition(variants: &[Variant], cfg: MergeConfig) -> Vec<Vec<String>> {
        let n = variants.len();
        let mut uf = UnionFind::new(n);
        for i in 0..n {
            for j in i + 1..n {
                let (a, b) = (&variants[i].text, &variants[j].text);
                let fp = fingerprint_key(a) == fingerprint_key(b);
                let long = a.chars().count() >= cfg.min_length && b.chars().count() >= cfg.min_length;
                if fp || (long && levenshtein(a, b) <= cfg.max_distance) {
                    uf.union(i, j);
                }
            }
        }
        let mut comps: BTreeMap<usize, Vec<String>> = BTreeMap::new();
        for i in 0..n {
            let r = uf.find(i);
            comps.entry(r).or_default().push(variants[i].text.clone());
        }
        let mut out: Vec<Vec<String>> = comps
            .into_values()
            .map(|mut v| {
                v.sort();
                v
            })
            .collect();
        out.sort();
        out
    }

    proptest! {
        #[test]
        fn partition_matches_pairwise_rule(
            words in proptest::collection::btree_set("[ab ]{1,7}", 1..25),
            max_distance in 0usize..4,
            min_length in 1usize..6,
        ) {
            let variants: Vec<Variant> = words.iter().map(|w| Variant::new(w.clone(), 1)).collect();
            let cfg = MergeConfig { max_distance, min_length };
            let map = merge_variants(&variants, cfg);
            let mut got: Vec<Vec<String>> = map.groups.iter().map(|g| g.variants.clone()).collect();
            got.sort();
            prop_assert_eq!(got, brute_force_partition(&variants, cfg));

            // partition: every input variant in exactly one group
            let total: usize = map.groups.iter().map(|g| g.variants.len()).sum();
            prop_assert_eq!(total, variants.len());
        }
    }
}
