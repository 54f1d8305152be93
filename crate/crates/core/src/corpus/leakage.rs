//! Counts how often dataset entities, drug pairs and triplets co-occur in the
//! corpus, at sentence and at abstract granularity.
//!
//! An item "occurs" in a unit when every one of its members is mentioned in
//! that unit. Membership is by canonical key, independent of the entity type
//! the matcher assigned. An abstract's mention set is the union of its
//! sentences' mention sets.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::matcher::Matcher;
use super::sentences::split_sentences;
use super::Corpus;
use crate::dataset::LabeledTriplet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ItemKind {
    Drug,
    CellLine,
    DrugPair,
    Triplet,
}

impl fmt::Display for ItemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ItemKind::Drug => "drug",
            ItemKind::CellLine => "cell_line",
            ItemKind::DrugPair => "drug_pair",
            ItemKind::Triplet => "triplet",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountRow {
    pub kind: ItemKind,
    /// Canonical keys; drugs sorted, cell last for triplets.
    pub members: Vec<String>,
    pub sentence_count: u64,
    pub abstract_count: u64,
}

/// Fraction of items of `kind` that occur in fewer than `k` units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CdfBucket {
    pub kind: ItemKind,
    pub granularity: String,
    pub k: u64,
    pub items: usize,
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitCounts {
    pub sentences: usize,
    pub abstracts: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeakageReport {
    pub units: UnitCounts,
    pub rows: Vec<CountRow>,
    pub cdf: Vec<CdfBucket>,
    /// Dataset entities the matcher cannot find; they always count zero.
    pub missing_from_vocab: Vec<String>,
}

impl LeakageReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("kind,members,sentence_count,abstract_count\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{}\n",
                r.kind,
                r.members.join("|"),
                r.sentence_count,
                r.abstract_count
            ));
        }
        out
    }

    pub fn row(&self, kind: ItemKind, members: &[&str]) -> Option<&CountRow> {
        self.rows
            .iter()
            .find(|r| r.kind == kind && r.members.iter().map(String::as_str).eq(members.iter().copied()))
    }
}

type Item = (ItemKind, Vec<String>);

struct DatasetItems {
    drugs: BTreeSet<String>,
    cells: BTreeSet<String>,
    pairs: BTreeSet<(String, String)>,
    triplets: BTreeSet<(String, String, String)>,
}

impl DatasetItems {
    fn new(dataset: &[LabeledTriplet]) -> Self {
        let mut items = DatasetItems {
            drugs: BTreeSet::new(),
            cells: BTreeSet::new(),
            pairs: BTreeSet::new(),
            triplets: BTreeSet::new(),
        };
        for r in dataset {
            let t = &r.triplet;
            items.drugs.insert(t.drug_a.clone());
            items.drugs.insert(t.drug_b.clone());
            items.cells.insert(t.cell.clone());
            items.pairs.insert((t.drug_a.clone(), t.drug_b.clone()));
            items
                .triplets
                .insert((t.drug_a.clone(), t.drug_b.clone(), t.cell.clone()));
        }
        items
    }

    /// Items fully contained in one unit's mention set.
    fn hits(&self, keys: &BTreeSet<String>, out: &mut BTreeMap<Item, u64>) {
        let drugs: Vec<&String> = keys.iter().filter(|k| self.drugs.contains(*k)).collect();
        let cells: Vec<&String> = keys.iter().filter(|k| self.cells.contains(*k)).collect();
        for d in &drugs {
            *out.entry((ItemKind::Drug, vec![(*d).clone()])).or_insert(0) += 1;
        }
        for c in &cells {
            *out.entry((ItemKind::CellLine, vec![(*c).clone()])).or_insert(0) += 1;
        }
        for (i, a) in drugs.iter().enumerate() {
            for b in &drugs[i + 1..] {
                // keys iterate sorted, so a < b
                let pair = ((*a).clone(), (*b).clone());
                if !self.pairs.contains(&pair) {
                    continue;
                }
                *out.entry((ItemKind::DrugPair, vec![pair.0.clone(), pair.1.clone()]))
                    .or_insert(0) += 1;
                for c in &cells {
                    let t = (pair.0.clone(), pair.1.clone(), (*c).clone());
                    if self.triplets.contains(&t) {
                        *out.entry((ItemKind::Triplet, vec![t.0, t.1, t.2])).or_insert(0) += 1;
                    }
                }
            }
        }
    }

    fn all_items(&self) -> Vec<Item> {
        let mut items: Vec<Item> = Vec::new();
        items.extend(self.drugs.iter().map(|d| (ItemKind::Drug, vec![d.clone()])));
        items.extend(self.cells.iter().map(|c| (ItemKind::CellLine, vec![c.clone()])));
        items.extend(
            self.pairs
                .iter()
                .map(|(a, b)| (ItemKind::DrugPair, vec![a.clone(), b.clone()])),
        );
        items.extend(
            self.triplets
                .iter()
                .map(|(a, b, c)| (ItemKind::Triplet, vec![a.clone(), b.clone(), c.clone()])),
        );
        items.sort();
        items
    }
}

pub fn audit_leakage(
    corpus: &Corpus,
    matcher: &Matcher,
    dataset: &[LabeledTriplet],
    k_buckets: &[u64],
) -> LeakageReport {
    let items = DatasetItems::new(dataset);

    let per_abstract: Vec<(usize, BTreeMap<Item, u64>, BTreeMap<Item, u64>)> = corpus
        .abstracts
        .par_iter()
        .map(|a| {
            let mut sentence_hits = BTreeMap::new();
            let mut abstract_keys = BTreeSet::new();
            let sentences = split_sentences(&a.text);
            for (_, s) in &sentences {
                let keys: BTreeSet<String> = matcher.find(s).into_iter().map(|m| m.key).collect();
                items.hits(&keys, &mut sentence_hits);
                abstract_keys.extend(keys);
            }
            let mut abstract_hits = BTreeMap::new();
            items.hits(&abstract_keys, &mut abstract_hits);
            (sentences.len(), sentence_hits, abstract_hits)
        })
        .collect();

    let mut sentence_counts: BTreeMap<Item, u64> = BTreeMap::new();
    let mut abstract_counts: BTreeMap<Item, u64> = BTreeMap::new();
    let mut n_sentences = 0;
    for (n, s, a) in per_abstract {
        n_sentences += n;
        for (k, v) in s {
            *sentence_counts.entry(k).or_insert(0) += v;
        }
        for (k, v) in a {
            *abstract_counts.entry(k).or_insert(0) += v;
        }
    }

    let rows: Vec<CountRow> = items
        .all_items()
        .into_iter()
        .map(|item| CountRow {
            sentence_count: sentence_counts.get(&item).copied().unwrap_or(0),
            abstract_count: abstract_counts.get(&item).copied().unwrap_or(0),
            kind: item.0,
            members: item.1,
        })
        .collect();

    let mut ks: Vec<u64> = k_buckets.to_vec();
    ks.sort_unstable();
    ks.dedup();
    let mut cdf = Vec::new();
    for kind in [ItemKind::Drug, ItemKind::CellLine, ItemKind::DrugPair, ItemKind::Triplet] {
        let of_kind: Vec<&CountRow> = rows.iter().filter(|r| r.kind == kind).collect();
        for (granularity, pick) in [
            ("sentence", (|r: &CountRow| r.sentence_count) as fn(&CountRow) -> u64),
            ("abstract", |r: &CountRow| r.abstract_count),
        ] {
            for &k in &ks {
                let below = of_kind.iter().filter(|r| pick(r) < k).count();
                let fraction = if of_kind.is_empty() {
                    0.0
                } else {
                    below as f64 / of_kind.len() as f64
                };
                cdf.push(CdfBucket {
                    kind,
                    granularity: granularity.to_string(),
                    k,
                    items: of_kind.len(),
                    fraction,
                });
            }
        }
    }

    let missing_from_vocab = items
        .drugs
        .iter()
        .chain(items.cells.iter())
        .filter(|k| !matcher.has_key(k))
        .cloned()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();

    LeakageReport {
        units: UnitCounts {
            sentences: n_sentences,
            abstracts: corpus.len(),
        },
        rows,
        cdf,
        missing_from_vocab,
    }
}
