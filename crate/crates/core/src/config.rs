//! The shared TOML configuration. Relative paths resolve against the
//! directory of the config file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::classifier::{Grid, TrainConfig};
use crate::error::{Error, Result};
use crate::eval::EvalConfig;
use crate::gateway::GatewayConfig;
use crate::template::Distance;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub seed: u64,
    pub corpus: CorpusConfig,
    pub vocab: VocabConfig,
    pub dataset: DatasetConfig,
    pub gateway: GatewayConfig,
    #[serde(default)]
    pub cluster: ClusterConfig,
    #[serde(default)]
    pub synthesis: SynthesisConfig,
    #[serde(default, rename = "loop")]
    pub iteration: LoopConfig,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub grid: Grid,
    #[serde(default)]
    pub eval: EvalConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusConfig {
    pub path: PathBuf,
    /// Synergy keywords; empty selects the built-in list.
    #[serde(default)]
    pub keywords: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VocabConfig {
    pub paths: Vec<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub path: PathBuf,
    /// Drop triplets with no element in the gateway's token vocabulary.
    #[serde(default = "yes")]
    pub filter_by_token_vocab: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusterConfig {
    pub k: usize,
    pub max_swaps: usize,
    pub metric: Distance,
    /// Templates with fewer slots of a type are not clustered.
    pub min_drug_slots: usize,
    pub min_cell_slots: usize,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        ClusterConfig {
            k: 10,
            max_swaps: 10_000,
            metric: Distance::Cosine,
            min_drug_slots: 0,
            min_cell_slots: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WarmStartPolicy {
    /// Every placement of the sampled triplet's elements.
    #[default]
    All,
    /// One placement chosen at random.
    One,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decoding {
    #[default]
    Argmax,
    Sample,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthesisConfig {
    /// Triplets sampled per template per iteration for warm-starting.
    pub samples_per_template: usize,
    pub warm_start: WarmStartPolicy,
    pub manual_warm_start: bool,
    pub decoding: Decoding,
}

impl Default for SynthesisConfig {
    fn default() -> Self {
        SynthesisConfig {
            samples_per_template: 64,
            warm_start: WarmStartPolicy::All,
            manual_warm_start: false,
            decoding: Decoding::Argmax,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LoopConfig {
    pub iterations: usize,
    /// Write a resumable checkpoint after every iteration.
    pub checkpoint: bool,
}

impl Default for LoopConfig {
    fn default() -> Self {
        LoopConfig {
            iterations: 3,
            checkpoint: true,
        }
    }
}

impl Config {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config = Self::parse(&text).map_err(|e| Error::validation(format!("{}: {e}", path.display())))?;
        config.resolve_paths(path.parent().unwrap_or(Path::new(".")));
        Ok(config)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let config: Config = toml::from_str(text).map_err(|e| Error::validation(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.corpus.path);
        self.vocab.paths.iter_mut().for_each(fix);
        fix(&mut self.dataset.path);
        fix(&mut self.gateway.token_vocab);
    }

    pub fn validate(&self) -> Result<()> {
        self.gateway.validate()?;
        self.train.validate()?;
        self.eval.validate()?;
        if self.cluster.k == 0 {
            return Err(Error::validation("cluster.k must be positive"));
        }
        if self.synthesis.decoding == Decoding::Sample {
            return Err(Error::Unsupported("synthesis.decoding = \"sample\" is not implemented; use \"argmax\"".into()));
        }
        Ok(())
    }

    /// Canonical JSON form, used for digests.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }
}
