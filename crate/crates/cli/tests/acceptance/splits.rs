use std::collections::BTreeSet;

use litaug_core::dataset::{LabeledTriplet, Triplet};
use litaug_core::eval::{unseen_split, SplitMode};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{ensure, Outcome};

fn dataset(rng: &mut ChaCha8Rng) -> Vec<LabeledTriplet> {
    let n_drugs = rng.random_range(12..24);
    let n_cells = rng.random_range(3..8);
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for a in 0..n_drugs {
        for b in a + 1..n_drugs {
            for c in 0..n_cells {
                if rng.random_bool(0.8) {
                    let t = Triplet::new(&format!("drug{a}"), &format!("drug{b}"), &format!("cell{c}"));
                    if seen.insert(t.clone()) {
                        out.push(LabeledTriplet {
                            triplet: t,
                            label: u8::from(rng.random_bool(0.3)),
                        });
                    }
                }
            }
        }
    }
    out
}

fn expected_holdout(n: usize, fraction: f64) -> usize {
    ((fraction * n as f64).round() as usize).clamp(1, n - 1)
}

fn check(data: &[LabeledTriplet], mode: SplitMode, fraction: f64, seed: u64) -> Result<(), String> {
    let (split, held) = unseen_split(data, mode, fraction, seed).map_err(|e| e.to_string())?;
    let drugs: BTreeSet<&str> = data.iter().flat_map(|r| r.triplet.drugs()).collect();
    let cells: BTreeSet<&str> = data.iter().map(|r| r.triplet.cell.as_str()).collect();
    let (want_drugs, want_cells) = match mode {
        SplitMode::Drug => (expected_holdout(drugs.len(), fraction), 0),
        SplitMode::Cell => (0, expected_holdout(cells.len(), fraction)),
        _ => (
            expected_holdout(drugs.len(), fraction),
            expected_holdout(cells.len(), fraction),
        ),
    };
    ensure!(
        held.drugs.len() == want_drugs && held.cells.len() == want_cells,
        "held out {} drugs and {} cells, expected {want_drugs} and {want_cells}",
        held.drugs.len(),
        held.cells.len()
    );
    ensure!(
        held.drugs.iter().all(|d| drugs.contains(d.as_str())) && held.cells.iter().all(|c| cells.contains(c.as_str())),
        "held-out entity absent from the data"
    );
    ensure!(!split.train.is_empty() && !split.test.is_empty(), "empty side");
    ensure!(
        split.train.windows(2).all(|w| w[0] < w[1]) && split.test.windows(2).all(|w| w[0] < w[1]),
        "indices not strictly ascending"
    );
    let train: BTreeSet<usize> = split.train.iter().copied().collect();
    let test: BTreeSet<usize> = split.test.iter().copied().collect();
    for (i, r) in data.iter().enumerate() {
        let t = &r.triplet;
        let a = held.drugs.contains(&t.drug_a);
        let b = held.drugs.contains(&t.drug_b);
        let c = held.cells.contains(&t.cell);
        let should_test = match mode {
            SplitMode::Drug => a && b,
            SplitMode::Cell => c,
            _ => a && b && c,
        };
        let should_train = !a && !b && !c;
        ensure!(
            test.contains(&i) == should_test,
            "row {i} {t}: in test {} but should be {should_test}",
            test.contains(&i)
        );
        ensure!(
            train.contains(&i) == should_train,
            "row {i} {t}: in train {} but should be {should_train}",
            train.contains(&i)
        );
    }
    Ok(())
}

pub fn run() -> Outcome {
    let mut total = 0;
    for (m, mode) in [SplitMode::Drug, SplitMode::Cell, SplitMode::DrugAndCell].into_iter().enumerate() {
        for seed in 0..100u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed * 3 + m as u64);
            let data = dataset(&mut rng);
            let fraction = [0.3, 0.4, 0.5][rng.random_range(0..3)];
            check(&data, mode, fraction, seed).map_err(|e| format!("{mode:?} seed {seed}: {e}"))?;
            total += data.len();
        }
    }
    Ok(format!("300 splits over {total} rows checked row by row"))
}
