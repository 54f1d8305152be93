//! Typed entity vocabularies (drugs and cell lines) with provenance.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntityType {
    Drug,
    CellLine,
}

impl fmt::Display for EntityType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EntityType::Drug => "drug",
            EntityType::CellLine => "cell_line",
        })
    }
}

impl FromStr for EntityType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "drug" => Ok(EntityType::Drug),
            "cell_line" | "cell" | "cellline" => Ok(EntityType::CellLine),
            other => Err(Error::validation(format!("unknown entity type {other:?}"))),
        }
    }
}

/// Where a vocabulary entry came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    SeedDataset,
    Lincs,
    Gdsc,
    Ccle,
    Nci60,
    Synthesized,
}

impl FromStr for Source {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "seed" | "seeddataset" | "dataset" => Ok(Source::SeedDataset),
            "lincs" => Ok(Source::Lincs),
            "gdsc" => Ok(Source::Gdsc),
            "ccle" => Ok(Source::Ccle),
            "nci60" => Ok(Source::Nci60),
            "synthesized" => Ok(Source::Synthesized),
            other => Err(Error::validation(format!("unknown vocabulary source {other:?}"))),
        }
    }
}

/// Lowercased surface form; the identity of an entity name.
pub fn canonical_key(surface: &str) -> String {
    surface.trim().to_lowercase()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VocabEntry {
    pub surface: String,
    pub entity_type: EntityType,
    pub source: Source,
}

impl VocabEntry {
    pub fn key(&self) -> String {
        canonical_key(&self.surface)
    }
}

/// Set of typed names keyed by `(canonical_key, entity_type)`.
///
/// When the same key is inserted twice the lexicographically smaller surface
/// and the smaller source win, so the contents never depend on insertion order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityVocabulary {
    entries: BTreeMap<(String, EntityType), VocabEntry>,
}

impl EntityVocabulary {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns true if the vocabulary changed.
    pub fn insert(&mut self, surface: &str, entity_type: EntityType, source: Source) -> bool {
        let key = canonical_key(surface);
        if key.is_empty() {
            return false;
        }
        let surface = surface.trim().to_string();
        match self.entries.get_mut(&(key.clone(), entity_type)) {
            Some(existing) => {
                let mut changed = false;
                if surface < existing.surface {
                    existing.surface = surface;
                    changed = true;
                }
                if source < existing.source {
                    existing.source = source;
                    changed = true;
                }
                changed
            }
            None => {
                self.entries.insert(
                    (key, entity_type),
                    VocabEntry {
                        surface,
                        entity_type,
                        source,
                    },
                );
                true
            }
        }
    }

    pub fn contains(&self, key: &str, entity_type: EntityType) -> bool {
        self.entries.contains_key(&(canonical_key(key), entity_type))
    }

    pub fn get(&self, key: &str, entity_type: EntityType) -> Option<&VocabEntry> {
        self.entries.get(&(canonical_key(key), entity_type))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries in `(key, type)` order.
    pub fn iter(&self) -> impl Iterator<Item = &VocabEntry> {
        self.entries.values()
    }

    pub fn keys_of_type(&self, entity_type: EntityType) -> BTreeSet<String> {
        self.entries
            .keys()
            .filter(|(_, t)| *t == entity_type)
            .map(|(k, _)| k.clone())
            .collect()
    }

    /// Keys of the given type that did not come from synthesis.
    pub fn valid_keys_of_type(&self, entity_type: EntityType) -> BTreeSet<String> {
        self.entries
            .iter()
            .filter(|((_, t), e)| *t == entity_type && e.source != Source::Synthesized)
            .map(|((k, _), _)| k.clone())
            .collect()
    }

    pub fn count(&self, entity_type: EntityType) -> usize {
        self.entries.keys().filter(|(_, t)| *t == entity_type).count()
    }

    pub fn count_by_source(&self) -> BTreeMap<(EntityType, Source), usize> {
        let mut out = BTreeMap::new();
        for e in self.entries.values() {
            *out.entry((e.entity_type, e.source)).or_insert(0) += 1;
        }
        out
    }

    /// Reads a `surface<TAB>type<TAB>source` file with a header row.
    pub fn load_tsv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let vocab = Self::parse_tsv(&text)
            .map_err(|e| Error::validation(format!("{}: {e}", path.display())))?;
        log::info!(
            "loaded vocabulary {}: {} drugs, {} cell lines",
            path.display(),
            vocab.count(EntityType::Drug),
            vocab.count(EntityType::CellLine)
        );
        Ok(vocab)
    }

    pub fn parse_tsv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::validation("vocabulary file is empty"))?;
        let cols: Vec<_> = header.split('\t').map(str::trim).collect();
        if cols != ["surface", "type", "source"] {
            return Err(Error::validation(format!(
                "bad vocabulary header {header:?}, expected surface<TAB>type<TAB>source"
            )));
        }
        let mut vocab = Self::new();
        for (lineno, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<_> = line.split('\t').collect();
            if fields.len() != 3 {
                return Err(Error::validation(format!(
                    "line {}: expected 3 tab-separated fields",
                    lineno + 2
                )));
            }
            let ty: EntityType = fields[1].parse()?;
            let source: Source = fields[2].parse()?;
            vocab.insert(fields[0], ty, source);
        }
        Ok(vocab)
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from("surface\ttype\tsource\n");
        for e in self.entries.values() {
            let source = serde_json::to_value(e.source)
                .ok()
                .and_then(|v| v.as_str().map(str::to_owned))
                .unwrap_or_default();
            out.push_str(&format!("{}\t{}\t{}\n", e.surface, e.entity_type, source));
        }
        out
    }
}

impl Extend<VocabEntry> for EntityVocabulary {
    fn extend<I: IntoIterator<Item = VocabEntry>>(&mut self, iter: I) {
        for e in iter {
            self.insert(&e.surface, e.entity_type, e.source);
        }
    }
}
