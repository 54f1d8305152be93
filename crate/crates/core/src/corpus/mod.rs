//! Abstract ingestion, sentence splitting, entity matching, candidate mining
//! and co-occurrence auditing.

mod leakage;
mod matcher;
mod mining;
mod sentences;

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use leakage::{audit_leakage, CdfBucket, CountRow, ItemKind, LeakageReport, UnitCounts};
pub use matcher::{EntityMention, Matcher};
pub use mining::{mine_candidates, MinedSentence, DEFAULT_KEYWORDS};
pub use sentences::{split_sentences, SentenceSplitter};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Abstract {
    pub doc_id: String,
    #[serde(default)]
    pub title: String,
    pub text: String,
}

#[derive(Debug, Clone, Default)]
pub struct Corpus {
    pub abstracts: Vec<Abstract>,
    /// Lines that failed to parse or violated the abstract invariants.
    pub skipped: usize,
}

impl Corpus {
    pub fn from_abstracts(abstracts: Vec<Abstract>) -> Result<Self> {
        check_unique_ids(&abstracts)?;
        Ok(Corpus {
            abstracts,
            skipped: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.abstracts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.abstracts.is_empty()
    }
}

fn check_unique_ids(abstracts: &[Abstract]) -> Result<()> {
    let mut seen = HashSet::new();
    for a in abstracts {
        if !seen.insert(a.doc_id.as_str()) {
            return Err(Error::validation(format!("duplicate doc_id {:?}", a.doc_id)));
        }
    }
    Ok(())
}

/// Loads a JSON-lines corpus. Malformed lines are skipped and counted; a
/// repeated `doc_id` is fatal.
pub fn load_corpus(path: impl AsRef<Path>) -> Result<Corpus> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let corpus = parse_corpus(&text)?;
    if corpus.skipped > 0 {
        log::warn!("{}: skipped {} malformed lines", path.display(), corpus.skipped);
    }
    if corpus.is_empty() {
        log::warn!("{}: corpus is empty", path.display());
    }
    Ok(corpus)
}

pub fn parse_corpus(text: &str) -> Result<Corpus> {
    let mut abstracts = Vec::new();
    let mut skipped = 0;
    for line in text.lines() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<Abstract>(line) {
            Ok(a) if !a.doc_id.is_empty() && !a.text.trim().is_empty() => abstracts.push(a),
            _ => skipped += 1,
        }
    }
    check_unique_ids(&abstracts)?;
    Ok(Corpus { abstracts, skipped })
}
