use std::collections::{BTreeMap, BTreeSet};
use std::hash::{DefaultHasher, Hash, Hasher};

use litaug_core::augment::{add_dataset_entities, run_pipeline, AugmentMode, Inputs, PipelineState, RunOptions};
use litaug_core::classifier::TrainConfig;
use litaug_core::config::Config;
use litaug_core::corpus::{Abstract, Corpus};
use litaug_core::dataset::{LabeledTriplet, TrainingExample, Triplet};
use litaug_core::eval::{evaluate_split, mean, paired_t_test_greater, HeldOut, Split};
use litaug_core::gateway::{Capabilities, FillRequest, FillResponse, LanguageModel, MockGateway, TokenProb};
use litaug_core::vocab::{EntityType, EntityVocabulary, Source};
use litaug_core::GatewayError;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{ensure, Outcome};

const FRAMES: [&str; 5] = [
    "Here {a} and {b} acted synergistically in {c} cells.",
    "The combination of {a} with {b} was synergistic against {c} xenografts.",
    "In {c} cells, {a} synergizes with {b} to induce apoptosis.",
    "We observed strong synergy between {a} and {b} in the {c} line.",
    "Notably {a} plus {b} showed synergism in {c} but not in other models.",
];
const N_DRUGS: usize = 24;
const N_CELLS: usize = 8;
const DIM: usize = 16;

/// Hidden process: a triplet is synergistic when either drug's group
/// matches the cell line's group.
struct Truth {
    drugs: Vec<String>,
    cells: Vec<String>,
    drug_group: BTreeMap<String, usize>,
    cell_group: BTreeMap<String, usize>,
}

impl Truth {
    fn new(rng: &mut ChaCha8Rng) -> Self {
        let drugs: Vec<String> = (0..N_DRUGS).map(|i| format!("dx{i:02}")).collect();
        let cells: Vec<String> = (0..N_CELLS).map(|i| format!("cl{i}")).collect();
        let mut dg: Vec<usize> = (0..N_DRUGS).map(|i| i % 4).collect();
        let mut cg: Vec<usize> = (0..N_CELLS).map(|i| i % 4).collect();
        dg.shuffle(rng);
        cg.shuffle(rng);
        Truth {
            drug_group: drugs.iter().cloned().zip(dg).collect(),
            cell_group: cells.iter().cloned().zip(cg).collect(),
            drugs,
            cells,
        }
    }

    fn label(&self, drugs: &[&str], cell: &str) -> bool {
        let h = self.cell_group[cell];
        drugs.iter().any(|d| self.drug_group[*d] == h)
    }
}

/// A masked language model that completes every prompt into a triplet drawn
/// from the hidden process. Slot types are read off the allowed-token lists;
/// embeddings come from the ordinary mock.
struct RiggedModel {
    truth: Truth,
    embedder: MockGateway,
}

impl RiggedModel {
    fn complete(&self, request: &FillRequest, allowed: &[Vec<String>]) -> Vec<String> {
        let mut h = DefaultHasher::new();
        request.text.hash(&mut h);
        let mut rng = ChaCha8Rng::seed_from_u64(h.finish());
        let words: BTreeSet<&str> = request.text.split(|c: char| !c.is_ascii_alphanumeric()).collect();
        let present_drugs: Vec<&str> = self.truth.drugs.iter().map(String::as_str).filter(|d| words.contains(d)).collect();
        let present_cell = self.truth.cells.iter().map(String::as_str).find(|c| words.contains(c));
        let is_drug: Vec<bool> = allowed
            .iter()
            .map(|a| a.first().is_some_and(|t| self.truth.drug_group.contains_key(t)))
            .collect();
        let mut fallback = Vec::new();
        for attempt in 0..500 {
            let mut chosen: Vec<String> = Vec::new();
            for (slot, list) in allowed.iter().enumerate() {
                let options: Vec<&String> = list
                    .iter()
                    .filter(|t| !chosen.contains(t) && !present_drugs.contains(&t.as_str()))
                    .collect();
                let pick = options.choose(&mut rng).map_or_else(|| list[slot % list.len()].clone(), |t| (*t).clone());
                chosen.push(pick);
            }
            let mut drugs = present_drugs.clone();
            let mut cell = present_cell;
            for (t, &d) in chosen.iter().zip(&is_drug) {
                if d {
                    drugs.push(t);
                } else if cell.is_none() {
                    cell = Some(t);
                }
            }
            if attempt == 0 {
                fallback = chosen.clone();
            }
            if let Some(c) = cell {
                if drugs.len() >= 2 && self.truth.label(&drugs, c) {
                    return chosen;
                }
            }
        }
        fallback
    }
}

impl LanguageModel for RiggedModel {
    fn fill(&self, request: &FillRequest) -> Result<FillResponse, GatewayError> {
        request.validate()?;
        let allowed = request
            .allowed_tokens
            .clone()
            .ok_or_else(|| GatewayError::Protocol("this model only answers restricted prompts".into()))?;
        let chosen = self.complete(request, &allowed);
        let mut h = DefaultHasher::new();
        (&request.text, "confidence").hash(&mut h);
        let mut rng = ChaCha8Rng::seed_from_u64(h.finish());
        let slots = chosen
            .into_iter()
            .zip(&allowed)
            .map(|(top, list)| {
                let p = rng.random_range(0.5..0.95);
                let mut ranked = vec![TokenProb { token: top.clone(), prob: p }];
                let mut rest = (1.0 - p) / 2.0;
                for t in list.iter().filter(|t| **t != top) {
                    if ranked.len() >= request.top_k {
                        break;
                    }
                    ranked.push(TokenProb { token: t.clone(), prob: rest });
                    rest /= 2.0;
                }
                ranked.truncate(request.top_k);
                ranked
            })
            .collect();
        let response = FillResponse { slots };
        response.validate(request)?;
        Ok(response)
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, GatewayError> {
        self.embedder.embed(texts)
    }

    fn capabilities(&self) -> Result<Capabilities, GatewayError> {
        Ok(Capabilities {
            vocab_size: self.embedder.tokens().len(),
            dim: DIM,
            server_side_restriction: true,
            model_id: "rigged".into(),
        })
    }

    fn embedding_dim(&self) -> usize {
        DIM
    }
}

fn config(seed: u64) -> Result<Config, String> {
    Config::parse(&format!(
        r#"
seed = {seed}

[corpus]
path = "unused"

[vocab]
paths = []

[dataset]
path = "unused"

[gateway]
embedding_dim = {DIM}
token_vocab = "unused"
backend = {{ kind = "mock", seed = {seed} }}

[cluster]
k = 4

[synthesis]
samples_per_template = 16

[loop]
iterations = 2
checkpoint = false
"#
    ))
    .map_err(|e| e.to_string())
}

struct Scenario {
    data: Vec<LabeledTriplet>,
    split: Split,
    synthetic: Vec<TrainingExample>,
}

fn scenario(seed: u64) -> Result<Scenario, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let truth = Truth::new(&mut rng);

    let mut universe = Vec::new();
    for a in 0..N_DRUGS {
        for b in a + 1..N_DRUGS {
            for c in &truth.cells {
                let (da, db) = (&truth.drugs[a], &truth.drugs[b]);
                universe.push(LabeledTriplet {
                    triplet: Triplet::new(da, db, c),
                    label: u8::from(truth.label(&[da, db], c)),
                });
            }
        }
    }
    universe.shuffle(&mut rng);
    let data: Vec<LabeledTriplet> = universe[..520].to_vec();
    let train: Vec<LabeledTriplet> = data[..120].to_vec();

    let abstracts = (0..60)
        .map(|i| {
            let pick = |rng: &mut ChaCha8Rng| {
                let two: Vec<&String> = truth.drugs.choose_multiple(rng, 2).collect();
                FRAMES
                    .choose(rng)
                    .unwrap()
                    .replace("{a}", two[0])
                    .replace("{b}", two[1])
                    .replace("{c}", truth.cells.choose(rng).unwrap())
            };
            Abstract {
                doc_id: format!("doc{i}"),
                title: String::new(),
                text: format!("{} Patients were followed up. {}", pick(&mut rng), pick(&mut rng)),
            }
        })
        .collect();
    let corpus = Corpus::from_abstracts(abstracts).map_err(|e| e.to_string())?;

    let mut vocab = EntityVocabulary::new();
    for d in &truth.drugs {
        vocab.insert(d, EntityType::Drug, Source::Gdsc);
    }
    for c in &truth.cells {
        vocab.insert(c, EntityType::CellLine, Source::Ccle);
    }
    add_dataset_entities(&mut vocab, &train);
    let tokens: Vec<String> = truth.drugs.iter().chain(&truth.cells).cloned().collect();
    let gateway_tokens: BTreeSet<String> = tokens.iter().cloned().collect();
    let model = RiggedModel {
        embedder: MockGateway::new(seed, tokens, DIM),
        truth,
    };
    let inputs = Inputs {
        corpus,
        vocab: vocab.clone(),
        dataset: train.clone(),
        gateway: Box::new(model),
        gateway_tokens,
    };
    let config = config(seed)?;
    let options = RunOptions {
        mode: AugmentMode::Restricted,
        no_warm_start: false,
        seed,
    };
    let state = run_pipeline(PipelineState::new(options, vocab, train), &inputs, &config, None)
        .map_err(|e| e.to_string())?;
    Ok(Scenario {
        split: Split {
            train: (0..120).collect(),
            test: (120..520).collect(),
        },
        synthetic: state.synthetic.iter().map(Into::into).collect(),
        data,
    })
}

pub fn run() -> Outcome {
    let mut with = Vec::new();
    let mut without = Vec::new();
    let mut sizes = Vec::new();
    for seed in 0..10u64 {
        let s = scenario(seed)?;
        ensure!(!s.synthetic.is_empty(), "seed {seed}: no synthetic triplets");
        let train = TrainConfig {
            epochs: 30,
            batch_size: 32,
            learning_rate: 0.005,
            hidden_dim: 32,
            d_emb: 16,
            seed,
            ..TrainConfig::default()
        };
        let held = HeldOut::default();
        let base = evaluate_split(&s.data, &[], &s.split, &held, &train).map_err(|e| e.to_string())?;
        let aug = evaluate_split(&s.data, &s.synthetic, &s.split, &held, &train).map_err(|e| e.to_string())?;
        without.push(base.auprc);
        with.push(aug.auprc);
        sizes.push(s.synthetic.len());
    }
    let p = paired_t_test_greater(&with, &without);
    let (m_with, m_without) = (mean(&with), mean(&without));
    ensure!(
        m_with > m_without,
        "mean AUPRC with synthetic {m_with:.4}, without {m_without:.4}"
    );
    ensure!(p < 0.05, "paired one-sided p = {p:.4} (means {m_with:.4} vs {m_without:.4})");
    Ok(format!(
        "AUPRC {m_without:.3} -> {m_with:.3} over 10 seeds, p = {p:.2e}, synthetic sizes {sizes:?}"
    ))
}
