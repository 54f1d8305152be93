use serde::{Deserialize, Serialize};

use crate::classifier::predict;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoredExample {
    pub score: f64,
    pub label: u8,
}

impl ScoredExample {
    pub fn new(score: f64, label: u8) -> Self {
        ScoredExample { score, label }
    }
}

fn counts(examples: &[ScoredExample]) -> Result<(usize, usize)> {
    if let Some(e) = examples.iter().find(|e| !e.score.is_finite() || e.label > 1) {
        return Err(Error::validation(format!("bad scored example {e:?}")));
    }
    let pos = examples.iter().filter(|e| e.label == 1).count();
    Ok((pos, examples.len() - pos))
}

/// Examples sorted by descending score, cut into groups of equal score.
fn tie_groups(examples: &[ScoredExample]) -> Vec<(usize, usize)> {
    let mut sorted: Vec<ScoredExample> = examples.to_vec();
    sorted.sort_by(|a, b| b.score.total_cmp(&a.score));
    let mut groups = Vec::new();
    let mut i = 0;
    while i < sorted.len() {
        let s = sorted[i].score;
        let (mut tp, mut fp) = (0, 0);
        while i < sorted.len() && sorted[i].score == s {
            if sorted[i].label == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        groups.push((tp, fp));
    }
    groups
}

/// Step-wise average precision, one step per distinct score.
pub fn auprc(examples: &[ScoredExample]) -> Result<f64> {
    let (pos, neg) = counts(examples)?;
    if pos == 0 || neg == 0 {
        return Err(Error::UndefinedMetric("AUPRC needs both classes"));
    }
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    for (gtp, gfp) in tie_groups(examples) {
        tp += gtp;
        fp += gfp;
        let recall = tp as f64 / pos as f64;
        ap += (recall - prev_recall) * (tp as f64 / (tp + fp) as f64);
        prev_recall = recall;
    }
    Ok(ap)
}

/// Best F1 over "score >= t" rules for every distinct score, plus the rule
/// that predicts nothing.
pub fn max_f1(examples: &[ScoredExample]) -> Result<f64> {
    let (pos, _) = counts(examples)?;
    if pos == 0 {
        return Err(Error::UndefinedMetric("max F1 needs a positive example"));
    }
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut best: f64 = 0.0;
    for (gtp, gfp) in tie_groups(examples) {
        tp += gtp;
        fp += gfp;
        let f1 = 2.0 * tp as f64 / (tp + fp + pos) as f64;
        best = best.max(f1);
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

/// Confusion counts under the classifier's `p > 0.5` rule.
pub fn confusion(examples: &[ScoredExample]) -> Confusion {
    let mut c = Confusion {
        tp: 0,
        fp: 0,
        tn: 0,
        fn_: 0,
    };
    for e in examples {
        match (predict(e.score), e.label) {
            (1, 1) => c.tp += 1,
            (1, _) => c.fp += 1,
            (_, 1) => c.fn_ += 1,
            _ => c.tn += 1,
        }
    }
    c
}

pub fn bacc(examples: &[ScoredExample]) -> Result<f64> {
    let (pos, neg) = counts(examples)?;
    if pos == 0 || neg == 0 {
        return Err(Error::UndefinedMetric("balanced accuracy needs both classes"));
    }
    let c = confusion(examples);
    Ok((c.tp as f64 / pos as f64 + c.tn as f64 / neg as f64) / 2.0)
}

/// Cohen's kappa of thresholded predictions against labels; 0 when chance
/// agreement is already perfect.
pub fn cohens_kappa(examples: &[ScoredExample]) -> Result<f64> {
    let (pos, neg) = counts(examples)?;
    if pos == 0 || neg == 0 {
        return Err(Error::UndefinedMetric("kappa needs both classes"));
    }
    let c = confusion(examples);
    let n = examples.len() as f64;
    let p_o = (c.tp + c.tn) as f64 / n;
    let pred_pos = (c.tp + c.fp) as f64 / n;
    let p_e = pred_pos * pos as f64 / n + (1.0 - pred_pos) * neg as f64 / n;
    if p_e >= 1.0 {
        return Ok(0.0);
    }
    Ok((p_o - p_e) / (1.0 - p_e))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSet {
    pub auprc: f64,
    pub max_f1: f64,
    pub bacc: f64,
    pub kappa: f64,
}

impl MetricSet {
    pub const NAMES: [&'static str; 4] = ["auprc", "max_f1", "bacc", "kappa"];

    pub fn compute(examples: &[ScoredExample]) -> Result<Self> {
        Ok(MetricSet {
            auprc: auprc(examples)?,
            max_f1: max_f1(examples)?,
            bacc: bacc(examples)?,
            kappa: cohens_kappa(examples)?,
        })
    }

    pub fn get(&self, i: usize) -> f64 {
        [self.auprc, self.max_f1, self.bacc, self.kappa][i]
    }
}
