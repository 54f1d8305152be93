use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{IterationStats, PipelineState, RunOptions};
use crate::config::Config;
use crate::dataset::LabeledTriplet;
use crate::error::{Error, Result};
use crate::synth::WeightedTriplet;
use crate::template::PromptTemplate;
use crate::vocab::{EntityVocabulary, VocabEntry};

const FORMAT: &str = "litaug-checkpoint";
const VERSION: u32 = 1;

/// First line of a checkpoint; template and synthetic lines follow in that
/// order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub format: String,
    pub version: u32,
    pub options: RunOptions,
    pub config_digest: String,
    pub dataset_digest: String,
    pub iteration: usize,
    pub vocab: Vec<VocabEntry>,
    pub stats: Vec<IterationStats>,
    pub templates: usize,
    pub synthetic: usize,
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn dataset_digest(dataset: &[LabeledTriplet]) -> String {
    sha256_hex(serde_json::to_string(dataset).expect("dataset serializes").as_bytes())
}

fn config_digest(config: &Config) -> String {
    // the run seed travels in the options, not the digest
    let mut c = config.clone();
    c.seed = 0;
    sha256_hex(c.canonical_json().as_bytes())
}

pub fn write_checkpoint(path: &Path, state: &PipelineState, config: &Config) -> Result<()> {
    let header = CheckpointHeader {
        format: FORMAT.into(),
        version: VERSION,
        options: state.options,
        config_digest: config_digest(config),
        dataset_digest: dataset_digest(&state.dataset),
        iteration: state.iteration,
        vocab: state.vocab.iter().cloned().collect(),
        stats: state.stats.clone(),
        templates: state.template_pool.len(),
        synthetic: state.synthetic.len(),
    };
    let mut out = serde_json::to_string(&header).expect("header serializes");
    out.push('\n');
    for t in &state.template_pool {
        out.push_str(&serde_json::to_string(t).expect("template serializes"));
        out.push('\n');
    }
    out.push_str(&crate::synth::synthetic_jsonl(&state.synthetic));
    let tmp = path.with_extension("jsonl.tmp");
    std::fs::write(&tmp, out).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// Restores a state written by [`write_checkpoint`] for the same config,
/// options and dataset.
pub fn read_checkpoint(
    path: &Path,
    config: &Config,
    options: RunOptions,
    dataset: &[LabeledTriplet],
) -> Result<PipelineState> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let bad = |msg: String| Error::validation(format!("{}: {msg}", path.display()));
    let mut lines = text.lines();
    let header: CheckpointHeader = serde_json::from_str(lines.next().unwrap_or(""))
        .map_err(|e| bad(format!("bad checkpoint header: {e}")))?;
    if header.format != FORMAT || header.version != VERSION {
        return Err(bad(format!("unsupported checkpoint {} v{}", header.format, header.version)));
    }
    if header.options != options {
        return Err(bad("checkpoint was written with different mode, seed or warm-start options".into()));
    }
    if header.config_digest != config_digest(config) {
        return Err(bad("checkpoint was written with a different configuration".into()));
    }
    if header.dataset_digest != dataset_digest(dataset) {
        return Err(bad("checkpoint was written for a different dataset".into()));
    }
    let body: Vec<&str> = lines.collect();
    if body.len() != header.templates + header.synthetic {
        return Err(bad(format!(
            "expected {} body lines, found {}",
            header.templates + header.synthetic,
            body.len()
        )));
    }
    let template_pool = body[..header.templates]
        .iter()
        .map(|l| serde_json::from_str::<PromptTemplate>(l))
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| bad(format!("bad template line: {e}")))?;
    let synthetic: Vec<WeightedTriplet> = crate::synth::parse_synthetic_jsonl(&body[header.templates..].join("\n"))
        .map_err(|e| bad(e.to_string()))?;
    let mut vocab = EntityVocabulary::new();
    for e in &header.vocab {
        vocab.insert(&e.surface, e.entity_type, e.source);
    }
    Ok(PipelineState {
        options,
        iteration: header.iteration,
        vocab,
        dataset: dataset.to_vec(),
        synthetic,
        template_pool,
        stats: header.stats,
    })
}
