use litaug_core::eval::{auprc, bacc, cohens_kappa, max_f1, ScoredExample};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{ensure, Outcome};

/// Distinct scores, highest first, found by pairwise comparison.
fn thresholds(ex: &[ScoredExample]) -> Vec<f64> {
    let mut ts: Vec<f64> = Vec::new();
    for (i, e) in ex.iter().enumerate() {
        if !ex[..i].iter().any(|o| o.score == e.score) {
            ts.push(e.score);
        }
    }
    ts.sort_by(|a, b| b.total_cmp(a));
    ts
}

/// True and false positives of the rule "score >= t".
fn at_threshold(ex: &[ScoredExample], t: f64) -> (f64, f64) {
    let mut tp = 0.0;
    let mut fp = 0.0;
    for e in ex {
        if e.score >= t {
            if e.label == 1 {
                tp += 1.0;
            } else {
                fp += 1.0;
            }
        }
    }
    (tp, fp)
}

fn positives(ex: &[ScoredExample]) -> f64 {
    ex.iter().filter(|e| e.label == 1).count() as f64
}

fn brute_auprc(ex: &[ScoredExample]) -> f64 {
    let pos = positives(ex);
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    for t in thresholds(ex) {
        let (tp, fp) = at_threshold(ex, t);
        let recall = tp / pos;
        ap += (recall - prev_recall) * tp / (tp + fp);
        prev_recall = recall;
    }
    ap
}

fn brute_max_f1(ex: &[ScoredExample]) -> f64 {
    let pos = positives(ex);
    let mut best: f64 = 0.0;
    for t in thresholds(ex) {
        let (tp, fp) = at_threshold(ex, t);
        if tp > 0.0 {
            let precision = tp / (tp + fp);
            let recall = tp / pos;
            best = best.max(2.0 * precision * recall / (precision + recall));
        }
    }
    best
}

/// Rows are labels, columns predictions under `score > 0.5`.
fn table(ex: &[ScoredExample]) -> [[f64; 2]; 2] {
    let mut t = [[0.0; 2]; 2];
    for e in ex {
        let pred = usize::from(e.score > 0.5);
        t[e.label as usize][pred] += 1.0;
    }
    t
}

fn brute_bacc(ex: &[ScoredExample]) -> f64 {
    let t = table(ex);
    let tpr = t[1][1] / (t[1][0] + t[1][1]);
    let tnr = t[0][0] / (t[0][0] + t[0][1]);
    (tpr + tnr) / 2.0
}

fn brute_kappa(ex: &[ScoredExample]) -> f64 {
    let t = table(ex);
    let n = ex.len() as f64;
    let p_o = (t[0][0] + t[1][1]) / n;
    let mut p_e = 0.0;
    for c in 0..2 {
        let label_share = (t[c][0] + t[c][1]) / n;
        let pred_share = (t[0][c] + t[1][c]) / n;
        p_e += label_share * pred_share;
    }
    if p_e >= 1.0 {
        0.0
    } else {
        (p_o - p_e) / (1.0 - p_e)
    }
}

fn instance(rng: &mut ChaCha8Rng) -> Vec<ScoredExample> {
    let n = rng.random_range(2..=50);
    let tied = rng.random_bool(0.4);
    let levels = [0.1, 0.3, 0.5, 0.7, 0.9];
    let mut ex: Vec<ScoredExample> = (0..n)
        .map(|_| {
            let score = if tied {
                levels[rng.random_range(0..levels.len())]
            } else {
                rng.random::<f64>()
            };
            ScoredExample::new(score, u8::from(rng.random_bool(0.4)))
        })
        .collect();
    ex[0].label = 1;
    ex[1].label = 0;
    ex
}

pub fn run() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    for i in 0..200 {
        let ex = instance(&mut rng);
        let pairs = [
            ("auprc", auprc(&ex).map_err(|e| e.to_string())?, brute_auprc(&ex)),
            ("max_f1", max_f1(&ex).map_err(|e| e.to_string())?, brute_max_f1(&ex)),
            ("bacc", bacc(&ex).map_err(|e| e.to_string())?, brute_bacc(&ex)),
            ("kappa", cohens_kappa(&ex).map_err(|e| e.to_string())?, brute_kappa(&ex)),
        ];
        for (name, fast, slow) in pairs {
            let d = (fast - slow).abs();
            ensure!(d < 1e-12, "instance {i}: {name} {fast} vs brute force {slow}");
            worst = worst.max(d);
        }
    }
    Ok(format!("200 instances, max |delta| {worst:.1e}"))
}
