//! Drug-synergy classifier: entity embedding tables and a feed-forward
//! network trained with Adam on original plus synthetic rows.

mod adam;
mod grid;
mod model;

use std::collections::BTreeSet;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{TrainingExample, Triplet};
use crate::error::{Error, Result};

pub use adam::{AdamParams, AdamState};
pub use grid::{grid_search, Grid, GridOutcome};
pub use model::{
    batch_loss, init_row, loss_and_grad, row_loss, sigmoid, Indices, SynergyModel, SyntheticSign, Target, Trace,
    LEAKY_SLOPE, P_CLAMP,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WarmupMode {
    /// Learning rate ramps linearly from 0 over the warm-up epochs.
    #[default]
    Lr,
    /// Synthetic rows join training only after the warm-up epochs.
    AugmentDelay,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub hidden_dim: usize,
    pub hidden_layers: usize,
    pub d_emb: usize,
    pub warmup_epochs: usize,
    pub warmup_mode: WarmupMode,
    pub use_instance_weights: bool,
    pub synthetic_sign: SyntheticSign,
    pub adam: AdamParams,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 50,
            batch_size: 64,
            learning_rate: 0.001,
            hidden_dim: 128,
            hidden_layers: 2,
            d_emb: 64,
            warmup_epochs: 0,
            warmup_mode: WarmupMode::Lr,
            use_instance_weights: true,
            synthetic_sign: SyntheticSign::Corrected,
            adam: AdamParams::default(),
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.d_emb == 0 || self.hidden_dim == 0 {
            return Err(Error::validation("batch_size, d_emb and hidden_dim must be positive"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::validation("learning_rate must be positive"));
        }
        let a = self.adam;
        if !(a.eps > 0.0 && (0.0..1.0).contains(&a.beta1) && (0.0..1.0).contains(&a.beta2)) {
            return Err(Error::validation("adam needs eps > 0 and betas in [0, 1)"));
        }
        Ok(())
    }

    pub fn hidden(&self) -> Vec<usize> {
        vec![self.hidden_dim; self.hidden_layers]
    }

    /// Learning rate for the 1-based optimizer step.
    pub fn lr_at(&self, step: u64, steps_per_epoch: usize) -> f64 {
        if self.warmup_mode == WarmupMode::Lr && self.warmup_epochs > 0 {
            let ramp = (self.warmup_epochs * steps_per_epoch) as f64;
            self.learning_rate * (step as f64 / ramp).min(1.0)
        } else {
            self.learning_rate
        }
    }
}

/// Loss rows for training: synthetic weights are dropped to 1 unless
/// instance weighting is on.
pub fn targets(example: &TrainingExample, config: &TrainConfig) -> Target {
    Target {
        label: f64::from(example.label),
        weight: if example.is_synthetic && !config.use_instance_weights {
            1.0
        } else {
            example.weight
        },
        synthetic: example.is_synthetic,
    }
}

/// Trains `model` in place and returns the summed loss over the epoch's
/// training rows after each epoch.
pub fn train_model(
    model: &mut SynergyModel,
    rows: &[(Indices, Target)],
    config: &TrainConfig,
) -> Result<Vec<f64>> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x73_6875_6666_6c65);
    let mut adam = AdamState::new(model.param_count());
    let mut grad = vec![0.0; model.param_count()];
    let steps_per_epoch = rows.len().div_ceil(config.batch_size);
    let mut trace = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let delay = config.warmup_mode == WarmupMode::AugmentDelay && epoch < config.warmup_epochs;
        let mut active: Vec<(Indices, Target)> = rows.iter().filter(|(_, t)| !(delay && t.synthetic)).copied().collect();
        active.shuffle(&mut rng);
        for batch in active.chunks(config.batch_size) {
            let loss = loss_and_grad(model, batch, config.synthetic_sign, &mut grad)?;
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::Diverged(format!(
                    "non-finite loss or gradient at epoch {epoch}, step {}",
                    adam.t + 1
                )));
            }
            let lr = config.lr_at(adam.t + 1, steps_per_epoch);
            adam.step(&mut model.params, &grad, lr, config.adam);
        }
        let loss = batch_loss(model, &active, config.synthetic_sign)?;
        if !loss.is_finite() {
            return Err(Error::Diverged(format!("loss is {loss} after epoch {epoch}")));
        }
        log::debug!("epoch {epoch}: loss {loss:.6}");
        trace.push(loss);
    }
    Ok(trace)
}

/// Decision rule: synergistic iff `p > 0.5`.
pub fn predict(p: f64) -> u8 {
    u8::from(p > 0.5)
}

/// A trained model together with the entity names behind its table rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Classifier {
    pub drugs: Vec<String>,
    pub cells: Vec<String>,
    pub model: SynergyModel,
    pub config: TrainConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub loss_trace: Vec<f64>,
    pub param_count: usize,
}

impl Classifier {
    /// Builds tables over the entities of `set` and `also_index`, then trains.
    ///
    /// Entities that only occur in `also_index` keep their initial rows.
    pub fn fit(set: &[TrainingExample], also_index: &[Triplet], config: &TrainConfig) -> Result<(Self, TrainReport)> {
        if set.is_empty() {
            return Err(Error::validation("training set is empty"));
        }
        config.validate()?;
        let mut drugs = BTreeSet::new();
        let mut cells = BTreeSet::new();
        for t in set.iter().map(|e| &e.triplet).chain(also_index) {
            drugs.insert(t.drug_a.clone());
            drugs.insert(t.drug_b.clone());
            cells.insert(t.cell.clone());
        }
        let drugs: Vec<String> = drugs.into_iter().collect();
        let cells: Vec<String> = cells.into_iter().collect();
        let model = SynergyModel::init(&drugs, &cells, config.d_emb, &config.hidden(), config.seed);
        let mut clf = Classifier {
            drugs,
            cells,
            model,
            config: config.clone(),
        };
        let rows: Vec<(Indices, Target)> = set
            .iter()
            .map(|e| Ok((clf.indices(&e.triplet)?, targets(e, config))))
            .collect::<Result<_>>()?;
        let loss_trace = train_model(&mut clf.model, &rows, config)?;
        let report = TrainReport {
            loss_trace,
            param_count: clf.model.param_count(),
        };
        log::info!("trained classifier with {} parameters", report.param_count);
        Ok((clf, report))
    }

    pub fn indices(&self, t: &Triplet) -> Result<Indices> {
        let find = |list: &[String], key: &str, kind: &str| {
            list.binary_search_by(|k| k.as_str().cmp(key))
                .map_err(|_| Error::validation(format!("unknown {kind} {key:?}")))
        };
        Ok(Indices::new(
            find(&self.drugs, &t.drug_a, "drug")?,
            find(&self.drugs, &t.drug_b, "drug")?,
            find(&self.cells, &t.cell, "cell line")?,
        ))
    }

    /// Synergy probability; entities missing from the tables use their
    /// seeded initial rows.
    pub fn score(&self, t: &Triplet) -> f64 {
        let d = self.model.d_emb;
        let row = |list: &[String], key: &str, kind: &str, offset: &dyn Fn(usize) -> usize| -> Vec<f64> {
            match list.binary_search_by(|k| k.as_str().cmp(key)) {
                Ok(i) => self.model.params[offset(i)..offset(i) + d].to_vec(),
                Err(_) => init_row(self.config.seed, kind, key, d),
            }
        };
        let drug_off = |i| self.model.drug_offset(i);
        let cell_off = |i| self.model.cell_offset(i);
        let mut x = row(&self.drugs, &t.drug_a, "drug", &drug_off);
        x.extend(row(&self.drugs, &t.drug_b, "drug", &drug_off));
        x.extend(row(&self.cells, &t.cell, "cell", &cell_off));
        self.model.forward_input(x).2
    }

    pub fn predict(&self, t: &Triplet) -> u8 {
        predict(self.score(t))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let json = serde_json::to_string(&Checkpoint::from(self)).expect("checkpoint serializes");
        std::fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let ck: Checkpoint = serde_json::from_str(&text)
            .map_err(|e| Error::validation(format!("{}: {e}", path.display())))?;
        ck.into_classifier()
            .map_err(|e| Error::validation(format!("{}: {e}", path.display())))
    }
}

const CHECKPOINT_FORMAT: &str = "litaug-classifier";
const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Tensor {
    name: String,
    shape: Vec<usize>,
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    format: String,
    version: u32,
    config: TrainConfig,
    drugs: Vec<String>,
    cells: Vec<String>,
    d_emb: usize,
    widths: Vec<usize>,
    tensors: Vec<Tensor>,
}

impl From<&Classifier> for Checkpoint {
    fn from(c: &Classifier) -> Self {
        let m = &c.model;
        let d = m.d_emb;
        let mut tensors = vec![
            Tensor {
                name: "drug_table".into(),
                shape: vec![m.n_drugs, d],
                data: m.params[..m.n_drugs * d].to_vec(),
            },
            Tensor {
                name: "cell_table".into(),
                shape: vec![m.n_cells, d],
                data: m.params[m.n_drugs * d..(m.n_drugs + m.n_cells) * d].to_vec(),
            },
        ];
        for (l, ((wo, bo), w)) in m.layer_offsets().into_iter().zip(m.widths.windows(2)).enumerate() {
            tensors.push(Tensor {
                name: format!("layer{l}.weight"),
                shape: vec![w[1], w[0]],
                data: m.params[wo..bo].to_vec(),
            });
            tensors.push(Tensor {
                name: format!("layer{l}.bias"),
                shape: vec![w[1]],
                data: m.params[bo..bo + w[1]].to_vec(),
            });
        }
        Checkpoint {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            config: c.config.clone(),
            drugs: c.drugs.clone(),
            cells: c.cells.clone(),
            d_emb: d,
            widths: m.widths.clone(),
            tensors,
        }
    }
}

impl Checkpoint {
    fn into_classifier(self) -> Result<Classifier> {
        if self.format != CHECKPOINT_FORMAT || self.version != CHECKPOINT_VERSION {
            return Err(Error::validation(format!(
                "unsupported checkpoint {} v{}",
                self.format, self.version
            )));
        }
        let mut params = Vec::new();
        for t in &self.tensors {
            if t.shape.iter().product::<usize>() != t.data.len() {
                return Err(Error::validation(format!("tensor {} does not match its shape", t.name)));
            }
            params.extend_from_slice(&t.data);
        }
        let model = SynergyModel {
            n_drugs: self.drugs.len(),
            n_cells: self.cells.len(),
            d_emb: self.d_emb,
            widths: self.widths,
            params,
        };
        model.check()?;
        if !self.drugs.windows(2).all(|w| w[0] < w[1]) || !self.cells.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::validation("entity lists must be sorted and unique"));
        }
        Ok(Classifier {
            drugs: self.drugs,
            cells: self.cells,
            model,
            config: self.config,
        })
    }
}
