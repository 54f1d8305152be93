use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{LabeledTriplet, Triplet};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SplitMode {
    Standard,
    Drug,
    Cell,
    DrugAndCell,
}

impl std::str::FromStr for SplitMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "standard" => Ok(SplitMode::Standard),
            "drug" => Ok(SplitMode::Drug),
            "cell" => Ok(SplitMode::Cell),
            "drug-and-cell" | "drug&cell" => Ok(SplitMode::DrugAndCell),
            other => Err(Error::validation(format!("unknown split mode {other:?}"))),
        }
    }
}

/// Indices of one train/test split, each sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// `k` folds stratified on the label: each class is shuffled and dealt
/// round-robin, the negatives continuing where the positives stopped.
pub fn stratified_kfold(labels: &[u8], k: usize, seed: u64) -> Result<Vec<Split>> {
    if k < 2 {
        return Err(Error::validation("need at least 2 folds"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fold_of = vec![0usize; labels.len()];
    let mut offset = 0;
    for class in [1u8, 0] {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if members.len() < k {
            return Err(Error::validation(format!(
                "class {class} has {} examples, fewer than {k} folds",
                members.len()
            )));
        }
        members.shuffle(&mut rng);
        for (j, &i) in members.iter().enumerate() {
            fold_of[i] = (offset + j) % k;
        }
        offset = (offset + members.len()) % k;
    }
    Ok((0..k)
        .map(|f| Split {
            train: (0..labels.len()).filter(|&i| fold_of[i] != f).collect(),
            test: (0..labels.len()).filter(|&i| fold_of[i] == f).collect(),
        })
        .collect())
}

/// Entities held out by an unseen-entity split.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct HeldOut {
    pub drugs: BTreeSet<String>,
    pub cells: BTreeSet<String>,
}

impl HeldOut {
    /// A triplet may train only if it touches no held-out entity.
    pub fn allows_train(&self, t: &Triplet) -> bool {
        !self.drugs.contains(&t.drug_a) && !self.drugs.contains(&t.drug_b) && !self.cells.contains(&t.cell)
    }
}

fn sample(entities: BTreeSet<String>, fraction: f64, rng: &mut ChaCha8Rng, what: &str) -> Result<BTreeSet<String>> {
    let n = entities.len();
    if n < 2 {
        return Err(Error::validation(format!(
            "an unseen-{what} split needs at least 2 distinct {what}s, found {n}"
        )));
    }
    let take = ((fraction * n as f64).round() as usize).clamp(1, n - 1);
    let mut all: Vec<String> = entities.into_iter().collect();
    all.shuffle(rng);
    all.truncate(take);
    Ok(all.into_iter().collect())
}

/// Holds out a random `holdout_fraction` of drugs and/or cells.
///
/// Test rows lie entirely inside the held-out set (both drugs, the cell, or
/// all three); train rows touch no held-out entity. Rows mixing held-out and
/// kept entities are left out of both.
pub fn unseen_split(
    data: &[LabeledTriplet],
    mode: SplitMode,
    holdout_fraction: f64,
    seed: u64,
) -> Result<(Split, HeldOut)> {
    if !(holdout_fraction > 0.0 && holdout_fraction < 1.0) {
        return Err(Error::validation("holdout fraction must lie in (0, 1)"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut held = HeldOut::default();
    let all_drugs: BTreeSet<String> = data
        .iter()
        .flat_map(|r| [r.triplet.drug_a.clone(), r.triplet.drug_b.clone()])
        .collect();
    let all_cells: BTreeSet<String> = data.iter().map(|r| r.triplet.cell.clone()).collect();
    match mode {
        SplitMode::Standard => {
            return Err(Error::validation("standard splits come from stratified_kfold"));
        }
        SplitMode::Drug => held.drugs = sample(all_drugs, holdout_fraction, &mut rng, "drug")?,
        SplitMode::Cell => held.cells = sample(all_cells, holdout_fraction, &mut rng, "cell line")?,
        SplitMode::DrugAndCell => {
            held.drugs = sample(all_drugs, holdout_fraction, &mut rng, "drug")?;
            held.cells = sample(all_cells, holdout_fraction, &mut rng, "cell line")?;
        }
    }
    let in_test = |t: &Triplet| {
        let drugs = held.drugs.contains(&t.drug_a) && held.drugs.contains(&t.drug_b);
        let cell = held.cells.contains(&t.cell);
        match mode {
            SplitMode::Drug => drugs,
            SplitMode::Cell => cell,
            _ => drugs && cell,
        }
    };
    let mut split = Split {
        train: Vec::new(),
        test: Vec::new(),
    };
    for (i, r) in data.iter().enumerate() {
        if in_test(&r.triplet) {
            split.test.push(i);
        } else if held.allows_train(&r.triplet) {
            split.train.push(i);
        }
    }
    if split.train.is_empty() || split.test.is_empty() {
        return Err(Error::validation(format!(
            "unseen split left {} train and {} test rows; use a denser dataset or a different holdout fraction",
            split.train.len(),
            split.test.len()
        )));
    }
    Ok((split, held))
}
