//! Prompt templates: masked sentences with typed slots, and the clustering
//! that picks representative ones.

mod kmedoids;
mod miner;

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use xxhash_rust::xxh3::xxh3_64;

use crate::corpus::MinedSentence;
use crate::error::{Error, Result};
use crate::gateway::MASK_TOKEN;
use crate::vocab::EntityType;

pub use kmedoids::{distance_matrix, k_medoids, k_medoids_from_matrix, Clustering, Distance};
pub use miner::{dedup_by_text, embed_batch, extract_templates};

pub const DRUG_MARKER: &str = "[DRUG_MASK]";
pub const CELL_MARKER: &str = "[CELL_MASK]";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlotType {
    Drug,
    Cell,
}

impl SlotType {
    pub fn marker(self) -> &'static str {
        match self {
            SlotType::Drug => DRUG_MARKER,
            SlotType::Cell => CELL_MARKER,
        }
    }

    pub fn entity_type(self) -> EntityType {
        match self {
            SlotType::Drug => EntityType::Drug,
            SlotType::Cell => EntityType::CellLine,
        }
    }

    pub fn from_entity(t: EntityType) -> Self {
        match t {
            EntityType::Drug => SlotType::Drug,
            EntityType::CellLine => SlotType::Cell,
        }
    }
}

impl fmt::Display for SlotType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SlotType::Drug => "drug",
            SlotType::Cell => "cell",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Slot {
    pub index: usize,
    #[serde(rename = "type")]
    pub slot_type: SlotType,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TemplateSource {
    Manual,
    /// A masked corpus sentence not (yet) chosen as a medoid.
    Sentence { doc_id: String, sentence_index: usize },
    Medoid {
        iteration: usize,
        cluster_id: usize,
        doc_id: String,
        sentence_index: usize,
    },
}

/// Text with typed slot markers; `slots[i]` describes the i-th marker.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub template_id: String,
    pub source: TemplateSource,
    pub text: String,
    pub slots: Vec<Slot>,
}

/// Stable id derived from the marked text.
pub fn template_id_for(text: &str) -> String {
    format!("t{:016x}", xxh3_64(text.as_bytes()))
}

impl PromptTemplate {
    /// Parses a marked text, deriving the slot list from its markers.
    pub fn from_marked(id: impl Into<String>, source: TemplateSource, text: &str) -> Self {
        let slots = scan_markers(text)
            .into_iter()
            .enumerate()
            .map(|(index, (_, t))| Slot {
                index,
                slot_type: t,
            })
            .collect();
        PromptTemplate {
            template_id: id.into(),
            source,
            text: text.to_string(),
            slots,
        }
    }

    pub fn count(&self, t: SlotType) -> usize {
        self.slots.iter().filter(|s| s.slot_type == t).count()
    }

    /// Markers in text agree with the slot list.
    pub fn is_consistent(&self) -> bool {
        let found: Vec<SlotType> = scan_markers(&self.text).into_iter().map(|(_, t)| t).collect();
        found.len() == self.slots.len()
            && self
                .slots
                .iter()
                .enumerate()
                .all(|(i, s)| s.index == i && s.slot_type == found[i])
    }

    /// Text pieces between markers; always `slots.len() + 1` of them.
    pub fn segments(&self) -> Vec<&str> {
        let mut out = Vec::with_capacity(self.slots.len() + 1);
        let mut pos = 0;
        for (start, t) in scan_markers(&self.text) {
            out.push(&self.text[pos..start]);
            pos = start + t.marker().len();
        }
        out.push(&self.text[pos..]);
        out
    }

    /// Substitutes `fills[i]` into slot i, or the model's mask token for `None`.
    pub fn render(&self, fills: &[Option<&str>]) -> String {
        let segs = self.segments();
        let mut out = String::with_capacity(self.text.len());
        for (i, seg) in segs.iter().enumerate() {
            out.push_str(seg);
            if i < self.slots.len() {
                out.push_str(fills.get(i).copied().flatten().unwrap_or(MASK_TOKEN));
            }
        }
        out
    }

    /// Every slot as the model's mask token.
    pub fn masked_text(&self) -> String {
        self.render(&[])
    }

    /// Inverse of [`mask_sentence`] given the original surfaces.
    pub fn unmask(&self, surfaces: &[&str]) -> String {
        let fills: Vec<Option<&str>> = surfaces.iter().map(|s| Some(*s)).collect();
        self.render(&fills)
    }
}

fn scan_markers(text: &str) -> Vec<(usize, SlotType)> {
    let mut out: Vec<(usize, SlotType)> = text
        .match_indices(DRUG_MARKER)
        .map(|(i, _)| (i, SlotType::Drug))
        .chain(text.match_indices(CELL_MARKER).map(|(i, _)| (i, SlotType::Cell)))
        .collect();
    out.sort_unstable();
    out
}

/// True if the text could be confused with template markup.
pub fn contains_markup(text: &str) -> bool {
    text.contains(DRUG_MARKER) || text.contains(CELL_MARKER) || text.contains(MASK_TOKEN)
}

/// Replaces every entity mention by its typed marker, in text order.
///
/// The sentence must not already contain marker text (see [`contains_markup`]).
pub fn mask_sentence(mined: &MinedSentence) -> PromptTemplate {
    debug_assert!(!contains_markup(&mined.text));
    let mut text = String::with_capacity(mined.text.len());
    let mut slots = Vec::with_capacity(mined.mentions.len());
    let mut pos = 0;
    for m in &mined.mentions {
        text.push_str(&mined.text[pos..m.start]);
        let t = SlotType::from_entity(m.entity_type);
        text.push_str(t.marker());
        slots.push(Slot {
            index: slots.len(),
            slot_type: t,
        });
        pos = m.end;
    }
    text.push_str(&mined.text[pos..]);
    PromptTemplate {
        template_id: template_id_for(&text),
        source: TemplateSource::Sentence {
            doc_id: mined.doc_id.clone(),
            sentence_index: mined.sentence_index,
        },
        text,
        slots,
    }
}

pub fn write_templates_jsonl(path: impl AsRef<Path>, templates: &[PromptTemplate]) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    for t in templates {
        out.push_str(&serde_json::to_string(t).expect("template serializes"));
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn read_templates_jsonl(path: impl AsRef<Path>) -> Result<Vec<PromptTemplate>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let t: PromptTemplate = serde_json::from_str(line)
            .map_err(|e| Error::validation(format!("{}:{}: {e}", path.display(), i + 1)))?;
        if !t.is_consistent() {
            return Err(Error::validation(format!(
                "{}:{}: slot list does not match markers",
                path.display(),
                i + 1
            )));
        }
        out.push(t);
    }
    Ok(out)
}
