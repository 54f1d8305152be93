//! The mine, cluster, synthesize and expand loop that grows the synthetic
//! dataset.

mod checkpoint;

use std::collections::{BTreeSet, HashSet};
use std::path::Path;

use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use checkpoint::{read_checkpoint, write_checkpoint, CheckpointHeader};

use crate::config::{Config, WarmStartPolicy};
use crate::corpus::{load_corpus, mine_candidates, Corpus, Matcher};
use crate::dataset::{filter_by_token_vocab, load_labeled_csv, merge_datasets, LabeledTriplet, TrainingSet, Triplet};
use crate::error::{Error, Result};
use crate::gateway::{load_token_vocab, LanguageModel};
use crate::seed::derive_seed;
use crate::synth::{
    assemble_triplets, canonicalize, expand_vocabulary, fill_prompt, manual_templates, warm_start_variants,
    AllowedTokens, FillMode, MaskFill, WarmStartPrompt, WeightedTriplet,
};
use crate::template::{
    contains_markup, dedup_by_text, embed_batch, extract_templates, k_medoids, mask_sentence, PromptTemplate,
    SlotType,
};
use crate::vocab::{EntityType, EntityVocabulary, Source};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AugmentMode {
    /// The fixed hand-written templates, filled once.
    Manual,
    /// Mined templates with vocabulary expansion.
    Iterative,
    /// Mined templates with fills restricted to valid entity names.
    Restricted,
}

impl std::str::FromStr for AugmentMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "manual" => Ok(AugmentMode::Manual),
            "iterative" => Ok(AugmentMode::Iterative),
            "restricted" => Ok(AugmentMode::Restricted),
            other => Err(Error::validation(format!(
                "unknown augment mode {other:?}; expected manual, iterative or restricted"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunOptions {
    pub mode: AugmentMode,
    /// Fill templates cold instead of pre-filling from sampled triplets.
    pub no_warm_start: bool,
    pub seed: u64,
}

/// Everything an augmentation run reads.
pub struct Inputs {
    pub corpus: Corpus,
    /// Seed vocabulary: the configured lists plus every dataset entity.
    pub vocab: EntityVocabulary,
    pub dataset: Vec<LabeledTriplet>,
    pub gateway: Box<dyn LanguageModel>,
    pub gateway_tokens: BTreeSet<String>,
}

impl Inputs {
    pub fn load(config: &Config) -> Result<Self> {
        let tokens = load_token_vocab(&config.gateway.token_vocab)?;
        let gateway = config.gateway.connect(&tokens)?;
        let gateway_tokens: BTreeSet<String> = tokens.into_iter().collect();
        let dataset = load_dataset(config, &gateway_tokens)?;
        let vocab = load_seed_vocab(config, &dataset)?;
        Ok(Inputs {
            corpus: load_corpus(&config.corpus.path)?,
            vocab,
            dataset,
            gateway,
            gateway_tokens,
        })
    }
}

/// The labeled dataset, filtered to triplets the gateway can see if
/// configured.
pub fn load_dataset(config: &Config, gateway_tokens: &BTreeSet<String>) -> Result<Vec<LabeledTriplet>> {
    let mut dataset = load_labeled_csv(&config.dataset.path)?;
    if config.dataset.filter_by_token_vocab {
        let before = dataset.len();
        dataset = filter_by_token_vocab(dataset, gateway_tokens);
        log::info!("token-vocabulary filter kept {} of {before} triplets", dataset.len());
    }
    if dataset.is_empty() {
        return Err(Error::validation(format!("{}: no usable triplets", config.dataset.path.display())));
    }
    Ok(dataset)
}

/// The configured vocabulary lists plus every dataset entity.
pub fn load_seed_vocab(config: &Config, dataset: &[LabeledTriplet]) -> Result<EntityVocabulary> {
    let mut vocab = EntityVocabulary::new();
    for p in &config.vocab.paths {
        for e in EntityVocabulary::load_tsv(p)?.iter() {
            vocab.insert(&e.surface, e.entity_type, e.source);
        }
    }
    add_dataset_entities(&mut vocab, dataset);
    Ok(vocab)
}

pub fn add_dataset_entities(vocab: &mut EntityVocabulary, dataset: &[LabeledTriplet]) {
    for r in dataset {
        let t = &r.triplet;
        vocab.insert(&t.drug_a, EntityType::Drug, Source::SeedDataset);
        vocab.insert(&t.drug_b, EntityType::Drug, Source::SeedDataset);
        vocab.insert(&t.cell, EntityType::CellLine, Source::SeedDataset);
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IterationStats {
    pub iteration: usize,
    pub mined_sentences: usize,
    pub candidate_templates: usize,
    pub new_templates: usize,
    pub pool_size: usize,
    pub prompts: usize,
    pub discarded_prompts: usize,
    pub new_triplets: usize,
    pub synthetic_size: usize,
    pub vocab_added: usize,
    pub multi_token_dropped: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineState {
    pub options: RunOptions,
    /// Completed iterations.
    pub iteration: usize,
    pub vocab: EntityVocabulary,
    pub dataset: Vec<LabeledTriplet>,
    /// Canonically sorted, never duplicating each other or the dataset.
    pub synthetic: Vec<WeightedTriplet>,
    /// Union of all templates so far, in order of first appearance.
    pub template_pool: Vec<PromptTemplate>,
    pub stats: Vec<IterationStats>,
}

impl PipelineState {
    pub fn new(options: RunOptions, vocab: EntityVocabulary, dataset: Vec<LabeledTriplet>) -> Self {
        PipelineState {
            options,
            iteration: 0,
            vocab,
            dataset,
            synthetic: Vec::new(),
            template_pool: Vec::new(),
            stats: Vec::new(),
        }
    }

    /// Original rows first, then synthetic rows not colliding with them.
    pub fn training_set(&self) -> TrainingSet {
        let syn: Vec<_> = self.synthetic.iter().map(Into::into).collect();
        merge_datasets(&self.dataset, &syn)
    }

    fn add_templates(&mut self, templates: Vec<PromptTemplate>) -> usize {
        let mut seen: HashSet<String> = self.template_pool.iter().map(|t| t.text.clone()).collect();
        let mut added = 0;
        for t in templates {
            if seen.insert(t.text.clone()) {
                self.template_pool.push(t);
                added += 1;
            }
        }
        added
    }
}

/// Masked candidate templates from the corpus under the current vocabulary.
pub fn mine_templates(
    corpus: &Corpus,
    vocab: &EntityVocabulary,
    config: &Config,
) -> Result<(usize, Vec<PromptTemplate>)> {
    let matcher = Matcher::new(vocab)?;
    let mined = mine_candidates(corpus, &matcher, &config.corpus.keywords);
    let n = mined.len();
    let templates = mined
        .iter()
        .filter(|m| !contains_markup(&m.text))
        .map(mask_sentence)
        .filter(|t| {
            t.count(SlotType::Drug) >= config.cluster.min_drug_slots
                && t.count(SlotType::Cell) >= config.cluster.min_cell_slots
                && !t.slots.is_empty()
        })
        .collect();
    Ok((n, dedup_by_text(templates)))
}

/// Medoid templates of one round of clustering.
pub fn cluster_templates(
    gateway: &dyn LanguageModel,
    candidates: &[PromptTemplate],
    config: &Config,
    iteration: usize,
) -> Result<Vec<PromptTemplate>> {
    if candidates.is_empty() {
        return Ok(Vec::new());
    }
    let points = embed_batch(gateway, candidates)?;
    let k = config.cluster.k.min(candidates.len());
    let clustering = k_medoids(&points, k, config.cluster.max_swaps, config.cluster.metric)?;
    log::info!(
        "iteration {iteration}: clustered {} templates into {k}, cost {:.4} after {} swaps",
        candidates.len(),
        clustering.total_cost,
        clustering.swaps
    );
    Ok(extract_templates(&clustering, candidates, iteration))
}

/// Prompts for one template: cold, or warm-started from triplets drawn
/// uniformly with replacement from `population`.
fn prompts_for(
    template: &PromptTemplate,
    population: &[Triplet],
    gateway_tokens: &BTreeSet<String>,
    warm: bool,
    config: &Config,
    seed: u64,
    iteration: usize,
) -> Vec<WarmStartPrompt> {
    if !warm || population.is_empty() {
        return vec![WarmStartPrompt::new(template, None, Vec::new())];
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(
        seed,
        &format!("warm-start/{}", template.template_id),
        iteration as u64,
    ));
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for _ in 0..config.synthesis.samples_per_template {
        let t = population.choose(&mut rng).expect("population is non-empty");
        let variants = warm_start_variants(template, t, gateway_tokens);
        let chosen: Vec<WarmStartPrompt> = match config.synthesis.warm_start {
            WarmStartPolicy::All => variants,
            WarmStartPolicy::One => variants.choose(&mut rng).cloned().into_iter().collect(),
        };
        for p in chosen {
            if seen.insert(p.rendered_text.clone()) {
                out.push(p);
            }
        }
    }
    out
}

/// Fills every prompt (in parallel, results in prompt order) and assembles the
/// new triplets not already in the dataset or the synthetic set.
fn synthesize(
    state: &PipelineState,
    inputs: &Inputs,
    templates: &[PromptTemplate],
    warm: bool,
    mode: &FillMode,
    config: &Config,
    stats: &mut IterationStats,
) -> Result<(Vec<WeightedTriplet>, Vec<(usize, Vec<MaskFill>)>)> {
    let iteration = stats.iteration;
    let population: Vec<Triplet> = state
        .dataset
        .iter()
        .map(|r| r.triplet.clone())
        .chain(state.synthetic.iter().map(|w| w.triplet.clone()))
        .collect();
    let jobs: Vec<(usize, WarmStartPrompt)> = templates
        .iter()
        .enumerate()
        .flat_map(|(i, t)| {
            prompts_for(t, &population, &inputs.gateway_tokens, warm, config, state.options.seed, iteration)
                .into_iter()
                .map(move |p| (i, p))
        })
        .collect();
    stats.prompts = jobs.len();
    let filled: Vec<Option<Vec<MaskFill>>> = jobs
        .par_iter()
        .map(|(_, p)| fill_prompt(inputs.gateway.as_ref(), p, mode))
        .collect::<Result<_>>()?;
    let known: HashSet<&Triplet> = state
        .dataset
        .iter()
        .map(|r| &r.triplet)
        .chain(state.synthetic.iter().map(|w| &w.triplet))
        .collect();
    let mut fresh = Vec::new();
    let mut used_fills = Vec::new();
    for ((ti, prompt), fills) in jobs.iter().zip(filled) {
        let Some(fills) = fills else {
            stats.discarded_prompts += 1;
            continue;
        };
        fresh.extend(
            assemble_triplets(&templates[*ti], prompt, &fills, iteration)
                .into_iter()
                .filter(|w| !known.contains(&w.triplet)),
        );
        used_fills.push((*ti, fills));
    }
    Ok((canonicalize(fresh), used_fills))
}

fn merge_synthetic(state: &mut PipelineState, fresh: Vec<WeightedTriplet>) -> usize {
    let n = fresh.len();
    state.synthetic.extend(fresh);
    state.synthetic.sort_by(|a, b| a.triplet.cmp(&b.triplet));
    n
}

/// Fills every pooled template, adds the new triplets and, in unrestricted
/// modes, expands the vocabulary with the fills.
pub fn fill_pool(
    state: &mut PipelineState,
    inputs: &Inputs,
    config: &Config,
    stats: &mut IterationStats,
) -> Result<()> {
    let mode = match state.options.mode {
        AugmentMode::Restricted => {
            let allowed = AllowedTokens::new(&state.vocab, &inputs.gateway_tokens);
            stats.multi_token_dropped = allowed.multi_token_dropped;
            FillMode::Restricted(allowed)
        }
        _ => FillMode::Unrestricted,
    };
    let pool = state.template_pool.clone();
    let warm = !state.options.no_warm_start;
    let (fresh, fills) = synthesize(state, inputs, &pool, warm, &mode, config, stats)?;
    stats.new_triplets = merge_synthetic(state, fresh);
    if mode == FillMode::Unrestricted {
        for (ti, f) in &fills {
            stats.vocab_added += expand_vocabulary(&mut state.vocab, &pool[*ti], f);
        }
    }
    stats.synthetic_size = state.synthetic.len();
    Ok(())
}

/// One mine, cluster, synthesize and expand round.
pub fn run_iteration(state: &mut PipelineState, inputs: &Inputs, config: &Config) -> Result<IterationStats> {
    let iteration = state.iteration + 1;
    let mut stats = IterationStats {
        iteration,
        ..Default::default()
    };
    let (mined, candidates) = mine_templates(&inputs.corpus, &state.vocab, config)?;
    stats.mined_sentences = mined;
    stats.candidate_templates = candidates.len();
    if candidates.is_empty() {
        log::warn!("iteration {iteration}: no candidate sentences mined");
    }
    let medoids = cluster_templates(inputs.gateway.as_ref(), &candidates, config, iteration)?;
    stats.new_templates = state.add_templates(medoids);
    stats.pool_size = state.template_pool.len();

    fill_pool(state, inputs, config, &mut stats)?;
    stats.synthetic_size = state.synthetic.len();
    state.iteration = iteration;
    state.stats.push(stats.clone());
    log::info!(
        "iteration {iteration}: pool {} (+{}), synthetic {} (+{}), vocab +{}",
        stats.pool_size,
        stats.new_templates,
        stats.synthetic_size,
        stats.new_triplets,
        stats.vocab_added
    );
    Ok(stats)
}

/// The hand-written templates filled once, cold unless configured otherwise.
pub fn run_manual(state: &mut PipelineState, inputs: &Inputs, config: &Config) -> Result<IterationStats> {
    let mut stats = IterationStats {
        iteration: 1,
        ..Default::default()
    };
    state.add_templates(manual_templates());
    stats.new_templates = state.template_pool.len();
    stats.pool_size = state.template_pool.len();
    let warm = config.synthesis.manual_warm_start && !state.options.no_warm_start;
    let pool = state.template_pool.clone();
    let (fresh, _) = synthesize(state, inputs, &pool, warm, &FillMode::Unrestricted, config, &mut stats)?;
    stats.new_triplets = merge_synthetic(state, fresh);
    stats.synthetic_size = state.synthetic.len();
    state.iteration = 1;
    state.stats.push(stats.clone());
    Ok(stats)
}

/// Runs the configured number of iterations (one for manual mode), resuming
/// from `state` and writing a checkpoint into `checkpoint_dir` after each.
pub fn run_pipeline(
    mut state: PipelineState,
    inputs: &Inputs,
    config: &Config,
    checkpoint_dir: Option<&Path>,
) -> Result<PipelineState> {
    let total = match state.options.mode {
        AugmentMode::Manual => 1,
        _ => config.iteration.iterations,
    };
    while state.iteration < total {
        match state.options.mode {
            AugmentMode::Manual => run_manual(&mut state, inputs, config)?,
            _ => run_iteration(&mut state, inputs, config)?,
        };
        if let Some(dir) = checkpoint_dir {
            let path = dir.join(format!("checkpoint-{:02}.jsonl", state.iteration));
            write_checkpoint(&path, &state, config)?;
        }
    }
    Ok(state)
}

/// Picks the latest `checkpoint-NN.jsonl` in `dir` compatible with `config`.
pub fn latest_checkpoint(dir: &Path) -> Result<Option<std::path::PathBuf>> {
    if !dir.is_dir() {
        return Ok(None);
    }
    let mut found: Vec<std::path::PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("checkpoint-") && n.ends_with(".jsonl"))
        })
        .collect();
    found.sort();
    Ok(found.pop())
}
