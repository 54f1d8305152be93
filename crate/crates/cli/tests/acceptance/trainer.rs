use litaug_core::classifier::{Classifier, Grid, TrainConfig};
use litaug_core::dataset::{TrainingExample, Triplet};
use litaug_core::eval::{bacc, ScoredExample};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::{ensure, Outcome};

/// Pairs of "active" drugs are synergistic in every cell line.
fn instance() -> (Vec<TrainingExample>, Vec<TrainingExample>) {
    let n_drugs = 12;
    let active = |d: usize| d.is_multiple_of(2);
    let mut rows = Vec::new();
    for a in 0..n_drugs {
        for b in a + 1..n_drugs {
            for c in 0..3 {
                rows.push(TrainingExample {
                    triplet: Triplet::new(&format!("d{a:02}"), &format!("d{b:02}"), &format!("c{c}")),
                    label: u8::from(active(a) && active(b)),
                    weight: 1.0,
                    is_synthetic: false,
                });
            }
        }
    }
    rows.shuffle(&mut ChaCha8Rng::seed_from_u64(3));
    let test = rows.split_off(rows.len() * 7 / 10);
    (rows, test)
}

pub fn run() -> Outcome {
    let (train, test) = instance();
    let test_triplets: Vec<Triplet> = test.iter().map(|e| e.triplet.clone()).collect();
    let mut summary = Vec::new();
    for lr in Grid::default().learning_rates {
        let config = TrainConfig {
            epochs: 50,
            batch_size: 8,
            learning_rate: lr,
            seed: 11,
            ..TrainConfig::default()
        };
        let (clf, _) = Classifier::fit(&train, &test_triplets, &config).map_err(|e| e.to_string())?;
        let correct = train.iter().filter(|e| clf.predict(&e.triplet) == e.label).count();
        let accuracy = correct as f64 / train.len() as f64;
        let scored: Vec<ScoredExample> = test
            .iter()
            .map(|e| ScoredExample::new(clf.score(&e.triplet), e.label))
            .collect();
        let b = bacc(&scored).map_err(|e| e.to_string())?;
        ensure!(accuracy == 1.0, "lr {lr}: training accuracy {accuracy:.4}");
        ensure!(b >= 0.95, "lr {lr}: held-out BACC {b:.4}");
        summary.push(format!("lr {lr}: BACC {b:.3}"));
    }
    Ok(format!("train accuracy 1.0; {}", summary.join(", ")))
}
