use aho_corasick::{AhoCorasick, AhoCorasickBuilder, MatchKind};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vocab::{EntityType, EntityVocabulary, Source};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityMention {
    /// Exactly `sentence[start..end]`.
    pub surface: String,
    pub key: String,
    pub entity_type: EntityType,
    pub start: usize,
    pub end: usize,
}

/// Case-insensitive dictionary matcher over all vocabulary surface forms.
///
/// Every occurrence is found in one automaton pass, occurrences flanked by
/// alphanumerics are dropped, and the rest are resolved leftmost-longest.
/// A key present under both types resolves to its non-synthesized type, and
/// to `Drug` when both or neither are synthesized.
#[derive(Debug, Clone)]
pub struct Matcher {
    automaton: AhoCorasick,
    keys: Vec<String>,
    types: Vec<EntityType>,
}

impl Matcher {
    pub fn new(vocab: &EntityVocabulary) -> Result<Self> {
        if vocab.is_empty() {
            return Err(Error::validation("cannot build a matcher from an empty vocabulary"));
        }
        let mut keys: Vec<String> = Vec::new();
        let mut types = Vec::new();
        let mut synthesized: Vec<bool> = Vec::new();
        // entries come sorted by (key, type) with Drug < CellLine
        for e in vocab.iter() {
            let key = e.key();
            let synth = e.source == Source::Synthesized;
            if keys.last() != Some(&key) {
                keys.push(key);
                types.push(e.entity_type);
                synthesized.push(synth);
            } else if *synthesized.last().expect("parallel vectors") && !synth {
                *types.last_mut().expect("parallel vectors") = e.entity_type;
                *synthesized.last_mut().expect("parallel vectors") = false;
            }
        }
        let automaton = AhoCorasickBuilder::new()
            .ascii_case_insensitive(true)
            .match_kind(MatchKind::Standard)
            .build(&keys)
            .map_err(|e| Error::validation(format!("matcher construction failed: {e}")))?;
        Ok(Matcher {
            automaton,
            keys,
            types,
        })
    }

    /// Whether `key` (already canonical) is one of the matched names.
    pub fn has_key(&self, key: &str) -> bool {
        self.keys.binary_search_by(|k| k.as_str().cmp(key)).is_ok()
    }

    pub fn pattern_count(&self) -> usize {
        self.keys.len()
    }

    pub fn find(&self, text: &str) -> Vec<EntityMention> {
        let mut hits: Vec<(usize, usize, usize)> = self
            .automaton
            .find_overlapping_iter(text)
            .filter(|m| is_word_bounded(text, m.start(), m.end()))
            .map(|m| (m.start(), m.end(), m.pattern().as_usize()))
            .collect();
        resolve_leftmost_longest(&mut hits);
        hits.into_iter()
            .map(|(start, end, p)| EntityMention {
                surface: text[start..end].to_string(),
                key: self.keys[p].clone(),
                entity_type: self.types[p],
                start,
                end,
            })
            .collect()
    }
}

/// True when neither neighbour of `text[start..end]` is alphanumeric.
pub(crate) fn is_word_bounded(text: &str, start: usize, end: usize) -> bool {
    if !text.is_char_boundary(start) || !text.is_char_boundary(end) {
        return false;
    }
    let before = text[..start].chars().next_back();
    let after = text[end..].chars().next();
    !before.is_some_and(char::is_alphanumeric) && !after.is_some_and(char::is_alphanumeric)
}

/// Keeps, from left to right, the longest hit at each start that does not
/// overlap an already kept one. Ties on identical spans go to the lower
/// pattern id.
pub(crate) fn resolve_leftmost_longest(hits: &mut Vec<(usize, usize, usize)>) {
    hits.sort_by(|a, b| a.0.cmp(&b.0).then(b.1.cmp(&a.1)).then(a.2.cmp(&b.2)));
    let mut pos = 0;
    hits.retain(|&(start, end, _)| {
        if start >= pos {
            pos = end;
            true
        } else {
            false
        }
    });
}
