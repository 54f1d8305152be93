//! Metrics, cross-validation and the comparison table across augmentation
//! settings.

mod metrics;
mod splits;
mod stats;

use std::collections::HashSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use metrics::{auprc, bacc, cohens_kappa, confusion, max_f1, Confusion, MetricSet, ScoredExample};
pub use splits::{stratified_kfold, unseen_split, HeldOut, Split, SplitMode};
pub use stats::{mean, paired_t_test_greater, stderr};

use crate::classifier::{Classifier, TrainConfig};
use crate::dataset::{LabeledTriplet, TrainingExample, Triplet};
use crate::error::{Error, Result};
use crate::seed::derive_seed;

/// Row names of the comparison table; the first is the baseline.
pub const SETTINGS: [&str; 5] = ["no-aug", "manual", "iterative", "restricted", "no-warm-start"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub folds: usize,
    /// Repetitions of the whole split procedure with derived seeds.
    pub repeats: usize,
    pub split: SplitMode,
    pub holdout_fraction: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            folds: 5,
            repeats: 1,
            split: SplitMode::Standard,
            holdout_fraction: 0.2,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if self.folds < 2 {
            return Err(Error::validation("eval.folds must be at least 2"));
        }
        if self.repeats == 0 {
            return Err(Error::validation("eval.repeats must be positive"));
        }
        Ok(())
    }
}

/// Train/test splits for one repetition: stratified folds for the standard
/// mode, independent unseen-entity splits otherwise.
pub fn make_splits(data: &[LabeledTriplet], config: &EvalConfig, seed: u64) -> Result<Vec<(Split, HeldOut)>> {
    config.validate()?;
    match config.split {
        SplitMode::Standard => {
            let labels: Vec<u8> = data.iter().map(|r| r.label).collect();
            Ok(stratified_kfold(&labels, config.folds, derive_seed(seed, "kfold", 0))?
                .into_iter()
                .map(|s| (s, HeldOut::default()))
                .collect())
        }
        mode => (0..config.folds)
            .map(|f| unseen_split(data, mode, config.holdout_fraction, derive_seed(seed, "unseen", f as u64)))
            .collect(),
    }
}

/// Trains on the split's training rows plus every synthetic row that neither
/// collides with a dataset triplet nor touches a held-out entity, and scores
/// the test rows.
pub fn evaluate_split(
    data: &[LabeledTriplet],
    synthetic: &[TrainingExample],
    split: &Split,
    held: &HeldOut,
    train: &TrainConfig,
) -> Result<MetricSet> {
    let known: HashSet<&Triplet> = data.iter().map(|r| &r.triplet).collect();
    let set: Vec<TrainingExample> = split
        .train
        .iter()
        .map(|&i| TrainingExample::original(&data[i]))
        .chain(
            synthetic
                .iter()
                .filter(|e| !known.contains(&e.triplet) && held.allows_train(&e.triplet))
                .cloned(),
        )
        .collect();
    let test: Vec<Triplet> = split.test.iter().map(|&i| data[i].triplet.clone()).collect();
    let (clf, _) = Classifier::fit(&set, &test, train)?;
    let scored: Vec<ScoredExample> = split
        .test
        .iter()
        .map(|&i| ScoredExample::new(clf.score(&data[i].triplet), data[i].label))
        .collect();
    MetricSet::compute(&scored)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub repeat: usize,
    pub fold: usize,
    pub metrics: MetricSet,
}

/// Every (repeat, fold) evaluation, run in parallel and returned in order.
pub fn cross_validate(
    data: &[LabeledTriplet],
    synthetic: &[TrainingExample],
    config: &EvalConfig,
    train: &TrainConfig,
    seed: u64,
) -> Result<Vec<FoldResult>> {
    config.validate()?;
    let mut jobs = Vec::new();
    for repeat in 0..config.repeats {
        let splits = make_splits(data, config, derive_seed(seed, "repeat", repeat as u64))?;
        for (fold, (split, held)) in splits.into_iter().enumerate() {
            jobs.push((repeat, fold, split, held));
        }
    }
    jobs.into_par_iter()
        .map(|(repeat, fold, split, held)| {
            let cfg = TrainConfig {
                seed: derive_seed(seed, "train", (repeat * config.folds + fold) as u64),
                ..train.clone()
            };
            let metrics = evaluate_split(data, synthetic, &split, &held, &cfg)?;
            Ok(FoldResult { repeat, fold, metrics })
        })
        .collect()
}

/// Mean cross-validated AUPRC, the grid-search objective.
pub fn cv_auprc_scorer<'a>(
    data: &'a [LabeledTriplet],
    synthetic: &'a [TrainingExample],
    config: &'a EvalConfig,
    seed: u64,
) -> impl Fn(&TrainConfig) -> Result<f64> + Sync + 'a {
    move |train| {
        let folds = cross_validate(data, synthetic, config, train, seed)?;
        Ok(mean(&folds.iter().map(|f| f.metrics.auprc).collect::<Vec<_>>()))
    }
}

/// Fold results of one augmentation setting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SettingResult {
    pub setting: String,
    pub folds: Vec<FoldResult>,
}

/// One (setting, metric) cell group of the comparison table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub setting: String,
    pub metric: String,
    pub mean: f64,
    /// Fold-level standard error, averaged over repeats.
    pub stderr_folds: f64,
    /// Standard error of the per-repeat means; NaN with a single repeat.
    pub stderr_repeats: f64,
    /// One-sided paired t-test against the baseline over matching folds.
    pub p_vs_no_aug: Option<f64>,
}

fn per_repeat(folds: &[FoldResult], metric: usize) -> Vec<Vec<f64>> {
    let repeats = folds.iter().map(|f| f.repeat + 1).max().unwrap_or(0);
    let mut out = vec![Vec::new(); repeats];
    for f in folds {
        out[f.repeat].push(f.metrics.get(metric));
    }
    out
}

/// Long-format table: one row per setting and metric.
pub fn metric_table(results: &[SettingResult]) -> Result<Vec<MetricRow>> {
    let baseline = results.iter().find(|r| r.setting == SETTINGS[0]);
    let mut rows = Vec::new();
    for r in results {
        if r.folds.is_empty() {
            return Err(Error::validation(format!("setting {} has no folds", r.setting)));
        }
        if let Some(b) = baseline {
            let keys = |fs: &[FoldResult]| fs.iter().map(|f| (f.repeat, f.fold)).collect::<Vec<_>>();
            if keys(&b.folds) != keys(&r.folds) {
                return Err(Error::validation(format!(
                    "setting {} was evaluated on different folds than the baseline",
                    r.setting
                )));
            }
        }
        for (m, name) in MetricSet::NAMES.iter().enumerate() {
            let values: Vec<f64> = r.folds.iter().map(|f| f.metrics.get(m)).collect();
            let groups = per_repeat(&r.folds, m);
            let fold_se: Vec<f64> = groups.iter().map(|g| stderr(g)).collect();
            let repeat_means: Vec<f64> = groups.iter().map(|g| mean(g)).collect();
            let p_vs_no_aug = match baseline {
                Some(b) if b.setting != r.setting => {
                    let base: Vec<f64> = b.folds.iter().map(|f| f.metrics.get(m)).collect();
                    Some(paired_t_test_greater(&values, &base))
                }
                _ => None,
            };
            rows.push(MetricRow {
                setting: r.setting.clone(),
                metric: name.to_string(),
                mean: mean(&values),
                stderr_folds: mean(&fold_se),
                stderr_repeats: stderr(&repeat_means),
                p_vs_no_aug,
            });
        }
    }
    Ok(rows)
}

pub fn table_csv(rows: &[MetricRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["setting", "metric", "mean", "stderr_folds", "stderr_repeats", "p_vs_no_aug"])
        .expect("in-memory write");
    for r in rows {
        let num = |x: f64| if x.is_nan() { String::new() } else { format!("{x}") };
        w.write_record([
            r.setting.clone(),
            r.metric.clone(),
            num(r.mean),
            num(r.stderr_folds),
            num(r.stderr_repeats),
            r.p_vs_no_aug.map(num).unwrap_or_default(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 csv")
}
