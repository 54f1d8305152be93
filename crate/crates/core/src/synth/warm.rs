use std::collections::{BTreeSet, HashSet};

use serde::{Deserialize, Serialize};

use crate::dataset::Triplet;
use crate::template::{PromptTemplate, Slot, SlotType};
use crate::vocab::EntityType;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilledSlot {
    pub slot_index: usize,
    pub surface: String,
    pub entity_type: EntityType,
}

/// A template with some slots pre-filled from a dataset triplet.
///
/// Cold prompts (every slot left to the model) have no filled slots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WarmStartPrompt {
    pub template_id: String,
    pub source_triplet: Option<Triplet>,
    pub filled_slots: Vec<FilledSlot>,
    pub remaining_slots: Vec<Slot>,
    pub rendered_text: String,
}

impl WarmStartPrompt {
    pub fn new(template: &PromptTemplate, source_triplet: Option<Triplet>, mut filled: Vec<FilledSlot>) -> Self {
        filled.sort_by_key(|f| f.slot_index);
        let mut fills: Vec<Option<&str>> = vec![None; template.slots.len()];
        for f in &filled {
            fills[f.slot_index] = Some(&f.surface);
        }
        let remaining_slots = template
            .slots
            .iter()
            .filter(|s| fills[s.index].is_none())
            .copied()
            .collect();
        WarmStartPrompt {
            template_id: template.template_id.clone(),
            rendered_text: template.render(&fills),
            source_triplet,
            filled_slots: filled,
            remaining_slots,
        }
    }
}

/// Every placement of one or two in-vocabulary triplet elements into
/// type-matching slots that leaves at least one slot for the model,
/// deduplicated by rendered text.
pub fn warm_start_variants(
    template: &PromptTemplate,
    triplet: &Triplet,
    gateway_vocab: &BTreeSet<String>,
) -> Vec<WarmStartPrompt> {
    let elements: Vec<(&str, EntityType)> = [
        (triplet.drug_a.as_str(), EntityType::Drug),
        (triplet.drug_b.as_str(), EntityType::Drug),
        (triplet.cell.as_str(), EntityType::CellLine),
    ]
    .into_iter()
    .filter(|(k, _)| gateway_vocab.contains(*k))
    .collect();
    let slots_of = |t: EntityType| -> Vec<usize> {
        template
            .slots
            .iter()
            .filter(|s| s.slot_type == SlotType::from_entity(t))
            .map(|s| s.index)
            .collect()
    };
    let filled = |e: (&str, EntityType), slot_index: usize| FilledSlot {
        slot_index,
        surface: e.0.to_string(),
        entity_type: e.1,
    };

    let mut assignments: Vec<Vec<FilledSlot>> = Vec::new();
    for &e in &elements {
        for s in slots_of(e.1) {
            assignments.push(vec![filled(e, s)]);
        }
    }
    for i in 0..elements.len() {
        for j in i + 1..elements.len() {
            for s1 in slots_of(elements[i].1) {
                for s2 in slots_of(elements[j].1) {
                    if s1 != s2 {
                        assignments.push(vec![filled(elements[i], s1), filled(elements[j], s2)]);
                    }
                }
            }
        }
    }

    let mut seen = HashSet::new();
    assignments
        .into_iter()
        .map(|a| WarmStartPrompt::new(template, Some(triplet.clone()), a))
        .filter(|p| !p.remaining_slots.is_empty() && seen.insert(p.rendered_text.clone()))
        .collect()
}
