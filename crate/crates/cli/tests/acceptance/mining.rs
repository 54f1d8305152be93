use std::collections::{BTreeMap, BTreeSet};

use litaug_core::corpus::{
    audit_leakage, mine_candidates, split_sentences, Abstract, Corpus, EntityMention, ItemKind, Matcher,
    MinedSentence, DEFAULT_KEYWORDS,
};
use litaug_core::dataset::{LabeledTriplet, Triplet};
use litaug_core::vocab::{EntityType, EntityVocabulary, Source};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{ensure, Outcome};

const DRUGS: [&str; 10] = [
    "cisplatin",
    "5-fluorouracil",
    "mek",
    "mek-162",
    "abt 737",
    "abt",
    "azd6244",
    "x1",
    "olaparib",
    "bt",
];
const CELLS: [&str; 7] = ["a549", "mcf-7", "bt-483", "hct116", "x1", "pc 3", "u251"];
const FILLER: [&str; 16] = [
    "the", "combination", "of", "and", "with", "in", "cells", "was", "showed", "strong", "effect", "(", ")",
    ",", "nonsynergistic", "synergyx",
];

fn vocab() -> EntityVocabulary {
    let mut v = EntityVocabulary::new();
    for d in DRUGS {
        v.insert(d, EntityType::Drug, Source::Gdsc);
    }
    for c in CELLS {
        v.insert(c, EntityType::CellLine, Source::Ccle);
    }
    v
}

fn vary_case(rng: &mut ChaCha8Rng, s: &str) -> String {
    match rng.random_range(0..3) {
        0 => s.to_string(),
        1 => s.to_uppercase(),
        _ => s
            .chars()
            .map(|c| if rng.random_bool(0.5) { c.to_ascii_uppercase() } else { c })
            .collect(),
    }
}

fn sentence(rng: &mut ChaCha8Rng) -> String {
    let starters = ["The", "In", "We", "Here", "Notably"];
    let mut words = vec![starters.choose(rng).unwrap().to_string()];
    for _ in 0..rng.random_range(3..14) {
        let w = match rng.random_range(0..10) {
            0..=2 => {
                let d = *DRUGS.choose(rng).unwrap();
                vary_case(rng, d)
            }
            3 => {
                let c = *CELLS.choose(rng).unwrap();
                vary_case(rng, c)
            }
            4 => {
                let k = *DEFAULT_KEYWORDS.choose(rng).unwrap();
                vary_case(rng, k)
            }
            5 => format!("{}-treated", DRUGS.choose(rng).unwrap()),
            _ => FILLER.choose(rng).unwrap().to_string(),
        };
        words.push(w);
    }
    let mut s = words.join(" ");
    s.push('.');
    s
}

fn corpus(rng: &mut ChaCha8Rng) -> Corpus {
    let abstracts = (0..200)
        .map(|i| Abstract {
            doc_id: format!("pmid{i:04}"),
            title: String::new(),
            text: (0..rng.random_range(1..6))
                .map(|_| sentence(rng))
                .collect::<Vec<_>>()
                .join(" "),
        })
        .collect();
    Corpus::from_abstracts(abstracts).unwrap()
}

fn bounded(text: &str, start: usize, end: usize) -> bool {
    let before = text[..start].chars().last();
    let after = text[end..].chars().next();
    !before.is_some_and(|c| c.is_alphanumeric()) && !after.is_some_and(|c| c.is_alphanumeric())
}

/// Every vocabulary key tried at every offset, then leftmost-longest.
fn brute_mentions(text: &str) -> Vec<EntityMention> {
    let lower = text.to_ascii_lowercase();
    let mut keys: Vec<(&str, EntityType)> = DRUGS.iter().map(|d| (*d, EntityType::Drug)).collect();
    for c in CELLS {
        if !DRUGS.contains(&c) {
            keys.push((c, EntityType::CellLine));
        }
    }
    let mut out = Vec::new();
    let mut pos = 0;
    for start in 0..text.len() {
        if start < pos || !text.is_char_boundary(start) {
            continue;
        }
        let mut best: Option<(usize, &str, EntityType)> = None;
        for (key, t) in &keys {
            let end = start + key.len();
            if lower.get(start..end) == Some(*key) && bounded(text, start, end) && best.is_none_or(|b| end > b.0) {
                best = Some((end, key, *t));
            }
        }
        if let Some((end, key, t)) = best {
            out.push(EntityMention {
                surface: text[start..end].to_string(),
                key: key.to_string(),
                entity_type: t,
                start,
                end,
            });
            pos = end;
        }
    }
    out
}

fn brute_keywords(text: &str) -> Vec<String> {
    let lower = text.to_lowercase();
    let mut hits = Vec::new();
    for kw in DEFAULT_KEYWORDS {
        let mut found = false;
        for start in 0..lower.len() {
            let end = start + kw.len();
            if lower.get(start..end) == Some(kw) && bounded(&lower, start, end) {
                found = true;
            }
        }
        if found {
            hits.push(kw.to_string());
        }
    }
    hits
}

fn brute_mine(corpus: &Corpus) -> Vec<MinedSentence> {
    let mut out = Vec::new();
    for a in &corpus.abstracts {
        for (idx, s) in split_sentences(&a.text) {
            let mentions = brute_mentions(s);
            let keyword_hits = brute_keywords(s);
            let drugs: BTreeSet<&str> = mentions
                .iter()
                .filter(|m| m.entity_type == EntityType::Drug)
                .map(|m| m.key.as_str())
                .collect();
            let cell = mentions.iter().any(|m| m.entity_type == EntityType::CellLine);
            if drugs.len() >= 2 && cell && !keyword_hits.is_empty() {
                out.push(MinedSentence {
                    doc_id: a.doc_id.clone(),
                    sentence_index: idx,
                    text: s.to_string(),
                    mentions,
                    keyword_hits,
                });
            }
        }
    }
    out.sort_by(|a, b| a.doc_id.cmp(&b.doc_id).then(a.sentence_index.cmp(&b.sentence_index)));
    out
}

fn dataset(rng: &mut ChaCha8Rng) -> Vec<LabeledTriplet> {
    let mut drugs: Vec<&str> = DRUGS.to_vec();
    drugs.push("unlisted-drug");
    let mut cells: Vec<&str> = CELLS.to_vec();
    cells.push("unlisted-cell");
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    while out.len() < 60 {
        let a = drugs.choose(rng).unwrap();
        let b = drugs.choose(rng).unwrap();
        if a == b {
            continue;
        }
        let t = Triplet::new(a, b, cells.choose(rng).unwrap());
        if seen.insert(t.clone()) {
            out.push(LabeledTriplet {
                triplet: t,
                label: u8::from(rng.random_bool(0.3)),
            });
        }
    }
    out
}

type Counts = BTreeMap<(ItemKind, Vec<String>), (u64, u64)>;

/// Every dataset item checked against every sentence and abstract.
fn brute_leakage(corpus: &Corpus, data: &[LabeledTriplet]) -> (Counts, usize) {
    let mut items: BTreeSet<(ItemKind, Vec<String>)> = BTreeSet::new();
    for r in data {
        let t = &r.triplet;
        items.insert((ItemKind::Drug, vec![t.drug_a.clone()]));
        items.insert((ItemKind::Drug, vec![t.drug_b.clone()]));
        items.insert((ItemKind::CellLine, vec![t.cell.clone()]));
        items.insert((ItemKind::DrugPair, vec![t.drug_a.clone(), t.drug_b.clone()]));
        items.insert((ItemKind::Triplet, vec![t.drug_a.clone(), t.drug_b.clone(), t.cell.clone()]));
    }
    let units: Vec<Vec<BTreeSet<String>>> = corpus
        .abstracts
        .iter()
        .map(|a| {
            split_sentences(&a.text)
                .into_iter()
                .map(|(_, s)| brute_mentions(s).into_iter().map(|m| m.key).collect())
                .collect()
        })
        .collect();
    let n_sentences = units.iter().map(Vec::len).sum();
    let mut counts = Counts::new();
    for item in items {
        let (mut in_sentences, mut in_abstracts) = (0, 0);
        for sentences in &units {
            let mut union = BTreeSet::new();
            for keys in sentences {
                if item.1.iter().all(|m| keys.contains(m)) {
                    in_sentences += 1;
                }
                union.extend(keys.iter().cloned());
            }
            if item.1.iter().all(|m| union.contains(m)) {
                in_abstracts += 1;
            }
        }
        counts.insert(item, (in_sentences, in_abstracts));
    }
    (counts, n_sentences)
}

pub fn run() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5150);
    let corpus = corpus(&mut rng);
    let matcher = Matcher::new(&vocab()).map_err(|e| e.to_string())?;
    let keywords: Vec<String> = Vec::new();

    let mined = mine_candidates(&corpus, &matcher, &keywords);
    let expected = brute_mine(&corpus);
    ensure!(!expected.is_empty(), "toy corpus yields no candidates");
    ensure!(
        mined == expected,
        "mined {} sentences, brute force {}; first difference at {:?}",
        mined.len(),
        expected.len(),
        mined.iter().zip(&expected).position(|(a, b)| a != b)
    );

    let data = dataset(&mut rng);
    let report = audit_leakage(&corpus, &matcher, &data, &[1, 2, 5, 10, 100]);
    let (counts, n_sentences) = brute_leakage(&corpus, &data);
    ensure!(report.units.abstracts == corpus.len(), "abstract count {}", report.units.abstracts);
    ensure!(report.units.sentences == n_sentences, "sentence count {} vs {n_sentences}", report.units.sentences);
    let got: Counts = report
        .rows
        .iter()
        .map(|r| ((r.kind, r.members.clone()), (r.sentence_count, r.abstract_count)))
        .collect();
    ensure!(got.len() == report.rows.len(), "duplicate audit rows");
    if let Some((item, c)) = counts.iter().find(|(k, v)| got.get(*k) != Some(*v)) {
        return Err(format!("{item:?}: audit {:?}, brute force {c:?}", got.get(item)));
    }
    ensure!(got.len() == counts.len(), "audit has {} rows, brute force {}", got.len(), counts.len());
    for b in &report.cdf {
        let of_kind: Vec<&(u64, u64)> = counts.iter().filter(|(k, _)| k.0 == b.kind).map(|(_, v)| v).collect();
        let below = of_kind
            .iter()
            .filter(|c| if b.granularity == "sentence" { c.0 < b.k } else { c.1 < b.k })
            .count();
        ensure!(
            b.items == of_kind.len() && b.fraction == below as f64 / of_kind.len() as f64,
            "cdf bucket {b:?} disagrees ({below} of {})",
            of_kind.len()
        );
    }
    Ok(format!(
        "{} candidates and {} audit rows equal brute force",
        mined.len(),
        report.rows.len()
    ))
}
