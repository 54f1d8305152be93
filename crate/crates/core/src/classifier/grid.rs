use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::TrainConfig;
use crate::error::{Error, Result};

/// Hyperparameter axes searched exhaustively.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Grid {
    pub learning_rates: Vec<f64>,
    pub hidden_dims: Vec<usize>,
    pub warmup_epochs: Vec<usize>,
    pub instance_weights: Vec<bool>,
}

impl Default for Grid {
    fn default() -> Self {
        Grid {
            learning_rates: vec![0.01, 0.005, 0.001],
            hidden_dims: vec![128, 256, 512],
            warmup_epochs: vec![0, 5, 10, 20, 30, 40],
            instance_weights: vec![false, true],
        }
    }
}

impl Grid {
    /// Every combination applied to `base`, in preference order: lower
    /// learning rate, smaller hidden width, fewer warm-up epochs, unweighted
    /// first.
    pub fn configs(&self, base: &TrainConfig) -> Vec<TrainConfig> {
        let mut lrs = self.learning_rates.clone();
        lrs.sort_by(f64::total_cmp);
        lrs.dedup();
        let mut hidden = self.hidden_dims.clone();
        hidden.sort_unstable();
        hidden.dedup();
        let mut warm = self.warmup_epochs.clone();
        warm.sort_unstable();
        warm.dedup();
        let mut weights = self.instance_weights.clone();
        weights.sort_unstable();
        weights.dedup();
        let mut out = Vec::with_capacity(lrs.len() * hidden.len() * warm.len() * weights.len());
        for &learning_rate in &lrs {
            for &hidden_dim in &hidden {
                for &warmup_epochs in &warm {
                    for &use_instance_weights in &weights {
                        out.push(TrainConfig {
                            learning_rate,
                            hidden_dim,
                            warmup_epochs,
                            use_instance_weights,
                            ..base.clone()
                        });
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridOutcome {
    pub best: TrainConfig,
    pub best_score: f64,
    /// Every configuration with its score, in preference order.
    pub scores: Vec<(TrainConfig, f64)>,
}

/// Scores every grid point (in parallel) and returns the highest scorer;
/// equal scores go to the earlier point in preference order.
pub fn grid_search<F>(grid: &Grid, base: &TrainConfig, scorer: F) -> Result<GridOutcome>
where
    F: Fn(&TrainConfig) -> Result<f64> + Sync,
{
    let configs = grid.configs(base);
    if configs.is_empty() {
        return Err(Error::validation("hyperparameter grid is empty"));
    }
    let scores: Vec<f64> = configs.par_iter().map(&scorer).collect::<Result<_>>()?;
    let mut best = 0;
    for (i, s) in scores.iter().enumerate() {
        if s.is_nan() {
            log::warn!("grid point {i} scored NaN");
        } else if scores[best].is_nan() || *s > scores[best] {
            best = i;
        }
    }
    log::info!("grid search: best of {} configurations scored {:.4}", configs.len(), scores[best]);
    Ok(GridOutcome {
        best: configs[best].clone(),
        best_score: scores[best],
        scores: configs.into_iter().zip(scores).collect(),
    })
}
