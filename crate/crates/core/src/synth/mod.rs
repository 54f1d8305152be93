//! Cloze filling of prompt templates into weighted synthetic triplets.

mod fill;
mod warm;

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::{TrainingExample, Triplet};
use crate::error::{Error, Result};
use crate::template::{PromptTemplate, SlotType, TemplateSource};
use crate::vocab::{canonical_key, EntityType, EntityVocabulary, Source};

pub use fill::{fill_prompt, AllowedTokens, FillMode, MaskFill};
pub use warm::{warm_start_variants, FilledSlot, WarmStartPrompt};

const MANUAL: [&str; 11] = [
    "On cell line [CELL_MASK], [DRUG_MASK] has synergy with [DRUG_MASK].",
    "On cell line [CELL_MASK], [DRUG_MASK] are synergistic with [DRUG_MASK].",
    "[DRUG_MASK] has synergy with [DRUG_MASK] on cell line [CELL_MASK].",
    "[DRUG_MASK] and [DRUG_MASK] are synergistic on cell line [CELL_MASK].",
    "On cell line [CELL_MASK], there is a synergy between [DRUG_MASK] and [DRUG_MASK].",
    "There is a synergy between [DRUG_MASK] and [DRUG_MASK] on cell line [CELL_MASK].",
    "[DRUG_MASK] and [DRUG_MASK] are effective to treat to cell line [CELL_MASK].",
    "[DRUG_MASK] and [DRUG_MASK] are effective on cell line [CELL_MASK].",
    "On cell line [CELL_MASK], [DRUG_MASK] and [DRUG_MASK] are effective.",
    "On cell line [CELL_MASK], [DRUG_MASK] and [DRUG_MASK] are synergistic.",
    "On cell line [CELL_MASK], [DRUG_MASK] and [DRUG_MASK] have an synergy.",
];

/// The eleven hand-written prompts, ids `manual-01` .. `manual-11`.
pub fn manual_templates() -> Vec<PromptTemplate> {
    MANUAL
        .iter()
        .enumerate()
        .map(|(i, text)| PromptTemplate::from_marked(format!("manual-{:02}", i + 1), TemplateSource::Manual, text))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub template_id: String,
    pub iteration: usize,
    /// Dataset triplet the prompt was pre-filled from, if any.
    pub warm_start_triplet: Option<Triplet>,
    pub warm_start_slots: Vec<FilledSlot>,
    /// Gateway fills that went into this triplet.
    pub fills: Vec<MaskFill>,
}

/// A synthesized positive with its likelihood weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedTriplet {
    #[serde(flatten)]
    pub triplet: Triplet,
    pub label: u8,
    pub weight: f64,
    pub provenance: Provenance,
}

impl From<&WeightedTriplet> for TrainingExample {
    fn from(w: &WeightedTriplet) -> Self {
        TrainingExample {
            triplet: w.triplet.clone(),
            label: w.label,
            weight: w.weight,
            is_synthetic: true,
        }
    }
}

#[derive(Clone, Copy)]
struct PoolEntry<'a> {
    key: &'a str,
    /// Gateway fill behind this entry; `None` when warm-started.
    fill: Option<&'a MaskFill>,
}

fn pool<'a>(
    slot_type: SlotType,
    warm: &'a WarmStartPrompt,
    fills: &'a [(SlotType, String, MaskFill)],
) -> Vec<PoolEntry<'a>> {
    // per key, a warm start beats any fill and a likelier fill beats a less likely one
    let mut by_key: BTreeMap<&str, PoolEntry<'a>> = BTreeMap::new();
    let mut offer = |e: PoolEntry<'a>| {
        by_key
            .entry(e.key)
            .and_modify(|cur| {
                let better = match (cur.fill, e.fill) {
                    (Some(_), None) => true,
                    (Some(a), Some(b)) => b.probability > a.probability,
                    _ => false,
                };
                if better {
                    *cur = e;
                }
            })
            .or_insert(e);
    };
    for f in &warm.filled_slots {
        if SlotType::from_entity(f.entity_type) == slot_type {
            offer(PoolEntry {
                key: &f.surface,
                fill: None,
            });
        }
    }
    for (t, key, f) in fills {
        if *t == slot_type && !key.is_empty() {
            offer(PoolEntry { key, fill: Some(f) });
        }
    }
    by_key.into_values().collect()
}

/// Every (unordered distinct drug pair, cell) combination from the warm-start
/// and filled slots.
///
/// The weight is the geometric mean of the probabilities of the gateway fills
/// taking part in the triplet; warm-started elements contribute no term.
pub fn assemble_triplets(
    template: &PromptTemplate,
    warm: &WarmStartPrompt,
    fills: &[MaskFill],
    iteration: usize,
) -> Vec<WeightedTriplet> {
    let typed: Vec<(SlotType, String, MaskFill)> = fills
        .iter()
        .filter_map(|f| {
            let slot = template.slots.get(f.slot_index)?;
            Some((slot.slot_type, canonical_key(&f.token), f.clone()))
        })
        .collect();
    let drugs = pool(SlotType::Drug, warm, &typed);
    let cells = pool(SlotType::Cell, warm, &typed);
    let mut out = Vec::new();
    for i in 0..drugs.len() {
        for j in i + 1..drugs.len() {
            for c in &cells {
                let members = [drugs[i], drugs[j], *c];
                let used: Vec<MaskFill> = members.iter().filter_map(|m| m.fill.cloned()).collect();
                let weight = geometric_mean(used.iter().map(|f| f.probability));
                let mut used = used;
                used.sort_by_key(|f| f.slot_index);
                out.push(WeightedTriplet {
                    triplet: Triplet::new(drugs[i].key, drugs[j].key, c.key),
                    label: 1,
                    weight,
                    provenance: Provenance {
                        template_id: template.template_id.clone(),
                        iteration,
                        warm_start_triplet: warm.source_triplet.clone(),
                        warm_start_slots: warm.filled_slots.clone(),
                        fills: used,
                    },
                });
            }
        }
    }
    out
}

/// Geometric mean in log space; 1.0 for an empty input.
pub fn geometric_mean(probs: impl IntoIterator<Item = f64>) -> f64 {
    let (sum, n) = probs
        .into_iter()
        .fold((0.0, 0usize), |(s, n), p| (s + p.ln(), n + 1));
    if n == 0 {
        1.0
    } else {
        (sum / n as f64).exp().min(1.0)
    }
}

/// Adds every filled token under its slot's entity type with source
/// `Synthesized`. Returns the number of new entries.
pub fn expand_vocabulary(
    vocab: &mut EntityVocabulary,
    template: &PromptTemplate,
    fills: &[MaskFill],
) -> usize {
    let mut added = 0;
    for f in fills {
        if let Some(slot) = template.slots.get(f.slot_index) {
            let t: EntityType = slot.slot_type.entity_type();
            if !vocab.contains(&f.token, t) && vocab.insert(&f.token, t, Source::Synthesized) {
                added += 1;
            }
        }
    }
    added
}

/// Sorts by triplet and drops repeats, keeping the heaviest instance (ties go
/// to the smaller template id, then the smaller serialized provenance).
pub fn canonicalize(mut rows: Vec<WeightedTriplet>) -> Vec<WeightedTriplet> {
    rows.sort_by(|a, b| {
        a.triplet
            .cmp(&b.triplet)
            .then(b.weight.total_cmp(&a.weight))
            .then_with(|| a.provenance.template_id.cmp(&b.provenance.template_id))
            .then_with(|| provenance_key(a).cmp(&provenance_key(b)))
    });
    rows.dedup_by(|later, first| later.triplet == first.triplet);
    rows
}

fn provenance_key(t: &WeightedTriplet) -> String {
    serde_json::to_string(&t.provenance).expect("provenance serializes")
}

pub fn write_synthetic_jsonl(path: impl AsRef<Path>, rows: &[WeightedTriplet]) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, synthetic_jsonl(rows)).map_err(|e| Error::io(path, e))
}

pub fn synthetic_jsonl(rows: &[WeightedTriplet]) -> String {
    let mut out = String::new();
    for r in rows {
        out.push_str(&serde_json::to_string(r).expect("triplet serializes"));
        out.push('\n');
    }
    out
}

pub fn read_synthetic_jsonl(path: impl AsRef<Path>) -> Result<Vec<WeightedTriplet>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_synthetic_jsonl(&text).map_err(|e| Error::validation(format!("{}: {e}", path.display())))
}

pub fn parse_synthetic_jsonl(text: &str) -> Result<Vec<WeightedTriplet>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let row: WeightedTriplet = serde_json::from_str(line)
            .map_err(|e| Error::validation(format!("line {}: {e}", i + 1)))?;
        if row.label != 1 || !(row.weight > 0.0 && row.weight <= 1.0) {
            return Err(Error::validation(format!(
                "line {}: synthetic rows need label 1 and weight in (0, 1]",
                i + 1
            )));
        }
        if row.triplet != Triplet::new(&row.triplet.drug_a, &row.triplet.drug_b, &row.triplet.cell)
            || row.triplet.drug_a == row.triplet.drug_b
        {
            return Err(Error::validation(format!("line {}: triplet is not canonical", i + 1)));
        }
        out.push(row);
    }
    Ok(out)
}
