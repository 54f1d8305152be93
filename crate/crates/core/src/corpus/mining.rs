use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::matcher::{is_word_bounded, EntityMention, Matcher};
use super::sentences::split_sentences;
use super::Corpus;
use crate::vocab::EntityType;

pub const DEFAULT_KEYWORDS: [&str; 6] = [
    "synergy",
    "synergistic",
    "synergism",
    "synergize",
    "synergizes",
    "synergistically",
];

/// A corpus sentence naming at least two distinct drugs, one cell line and a
/// synergy keyword.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MinedSentence {
    pub doc_id: String,
    pub sentence_index: usize,
    pub text: String,
    pub mentions: Vec<EntityMention>,
    pub keyword_hits: Vec<String>,
}

impl MinedSentence {
    pub fn distinct_drugs(&self) -> BTreeSet<&str> {
        self.mentions
            .iter()
            .filter(|m| m.entity_type == EntityType::Drug)
            .map(|m| m.key.as_str())
            .collect()
    }

    pub fn satisfies_invariants(&self) -> bool {
        self.distinct_drugs().len() >= 2
            && self
                .mentions
                .iter()
                .any(|m| m.entity_type == EntityType::CellLine)
            && !self.keyword_hits.is_empty()
    }
}

/// Case-insensitive whole-word keyword hits, in keyword-list order.
pub(crate) fn keyword_hits(text: &str, keywords: &[String]) -> Vec<String> {
    let lower = text.to_lowercase();
    let mut hits = Vec::new();
    for kw in keywords {
        let kw = kw.to_lowercase();
        if kw.is_empty() || hits.contains(&kw) {
            continue;
        }
        let found = lower
            .match_indices(&kw)
            .any(|(i, m)| is_word_bounded(&lower, i, i + m.len()));
        if found {
            hits.push(kw);
        }
    }
    hits
}

/// Scans every sentence of every abstract. Output is ordered by
/// `(doc_id, sentence_index)` regardless of the worker count.
pub fn mine_candidates(corpus: &Corpus, matcher: &Matcher, keywords: &[String]) -> Vec<MinedSentence> {
    let keywords: Vec<String> = if keywords.is_empty() {
        DEFAULT_KEYWORDS.iter().map(|s| s.to_string()).collect()
    } else {
        keywords.to_vec()
    };
    let mut mined: Vec<MinedSentence> = corpus
        .abstracts
        .par_iter()
        .flat_map_iter(|a| {
            split_sentences(&a.text)
                .into_iter()
                .filter_map(|(idx, sentence)| {
                    let hits = keyword_hits(sentence, &keywords);
                    if hits.is_empty() {
                        return None;
                    }
                    let candidate = MinedSentence {
                        doc_id: a.doc_id.clone(),
                        sentence_index: idx,
                        text: sentence.to_string(),
                        mentions: matcher.find(sentence),
                        keyword_hits: hits,
                    };
                    candidate.satisfies_invariants().then_some(candidate)
                })
                .collect::<Vec<_>>()
        })
        .collect();
    mined.sort_by(|a, b| {
        a.doc_id
            .cmp(&b.doc_id)
            .then(a.sentence_index.cmp(&b.sentence_index))
    });
    mined
}
