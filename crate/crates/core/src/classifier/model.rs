use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use xxhash_rust::xxh3::xxh3_64_with_seed;

use crate::error::{Error, Result};

pub const LEAKY_SLOPE: f64 = 0.01;
/// Probabilities are clamped to `[P_CLAMP, 1 - P_CLAMP]` inside logarithms.
pub const P_CLAMP: f64 = 1e-7;

/// Entity indices of one example; the drug pair is sorted before lookup.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Indices {
    pub drug_a: usize,
    pub drug_b: usize,
    pub cell: usize,
}

impl Indices {
    pub fn new(a: usize, b: usize, cell: usize) -> Self {
        Indices {
            drug_a: a.min(b),
            drug_b: a.max(b),
            cell,
        }
    }
}

/// How a row enters the loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Target {
    pub label: f64,
    pub weight: f64,
    pub synthetic: bool,
}

/// Sign of the synthetic term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SyntheticSign {
    /// `-w log p`: weighted positive-class cross-entropy.
    #[default]
    Corrected,
    /// `+w log p`, exactly as the loss is usually printed.
    Literal,
}

/// Drug and cell embedding tables feeding a Leaky-ReLU network with a
/// logistic output, all parameters in one flat vector.
///
/// Layout: drug table, cell table, then `(W, b)` per layer with `W` stored
/// row-major as `out x in`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynergyModel {
    pub n_drugs: usize,
    pub n_cells: usize,
    pub d_emb: usize,
    /// Layer widths from the `3 * d_emb` input to the scalar output.
    pub widths: Vec<usize>,
    pub params: Vec<f64>,
}

/// Forward values kept for the backward pass.
#[derive(Debug, Clone)]
pub struct Trace {
    pub idx: Indices,
    /// Input to each layer.
    pub inputs: Vec<Vec<f64>>,
    /// Pre-activations of every layer; the last one has length 1.
    pub pre: Vec<Vec<f64>>,
    pub p: f64,
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn leaky(z: f64) -> f64 {
    if z > 0.0 {
        z
    } else {
        LEAKY_SLOPE * z
    }
}

fn leaky_grad(z: f64) -> f64 {
    if z > 0.0 {
        1.0
    } else {
        LEAKY_SLOPE
    }
}

/// One seeded embedding row, a function of the seed and the entity only, so
/// an entity gets the same initial row whatever table it sits in.
pub fn init_row(seed: u64, kind: &str, key: &str, d_emb: usize) -> Vec<f64> {
    let mut buf = kind.as_bytes().to_vec();
    buf.push(0);
    buf.extend_from_slice(key.as_bytes());
    let mut rng = ChaCha8Rng::seed_from_u64(xxh3_64_with_seed(&buf, seed));
    let bound = 1.0 / (d_emb as f64).sqrt();
    (0..d_emb).map(|_| rng.random_range(-bound..bound)).collect()
}

impl SynergyModel {
    /// Parameter count for the given shape.
    pub fn count_params(n_drugs: usize, n_cells: usize, d_emb: usize, hidden: &[usize]) -> usize {
        let mut widths = vec![3 * d_emb];
        widths.extend_from_slice(hidden);
        widths.push(1);
        (n_drugs + n_cells) * d_emb + widths.windows(2).map(|w| w[0] * w[1] + w[1]).sum::<usize>()
    }

    /// Embedding rows from [`init_row`]; layer weights uniform in
    /// `±1/sqrt(fan_in)`, biases zero.
    pub fn init(drugs: &[String], cells: &[String], d_emb: usize, hidden: &[usize], seed: u64) -> Self {
        let mut widths = vec![3 * d_emb];
        widths.extend_from_slice(hidden);
        widths.push(1);
        let mut params = Vec::with_capacity(Self::count_params(drugs.len(), cells.len(), d_emb, hidden));
        for d in drugs {
            params.extend(init_row(seed, "drug", d, d_emb));
        }
        for c in cells {
            params.extend(init_row(seed, "cell", c, d_emb));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6c61_7965_7273);
        for w in widths.windows(2) {
            let bound = 1.0 / (w[0] as f64).sqrt();
            params.extend((0..w[0] * w[1]).map(|_| rng.random_range(-bound..bound)));
            params.extend(std::iter::repeat_n(0.0, w[1]));
        }
        let model = SynergyModel {
            n_drugs: drugs.len(),
            n_cells: cells.len(),
            d_emb,
            widths,
            params,
        };
        log::debug!("classifier has {} parameters", model.params.len());
        model
    }

    pub fn hidden(&self) -> &[usize] {
        &self.widths[1..self.widths.len() - 1]
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn check(&self) -> Result<()> {
        let want = Self::count_params(self.n_drugs, self.n_cells, self.d_emb, self.hidden());
        if self.widths.first() != Some(&(3 * self.d_emb)) || self.widths.last() != Some(&1) || self.params.len() != want {
            return Err(Error::validation(format!(
                "model shape mismatch: {} parameters for widths {:?}, expected {want}",
                self.params.len(),
                self.widths
            )));
        }
        Ok(())
    }

    pub fn drug_offset(&self, i: usize) -> usize {
        i * self.d_emb
    }

    pub fn cell_offset(&self, i: usize) -> usize {
        (self.n_drugs + i) * self.d_emb
    }

    /// Offsets of `(W, b)` for each layer.
    pub fn layer_offsets(&self) -> Vec<(usize, usize)> {
        let mut pos = (self.n_drugs + self.n_cells) * self.d_emb;
        self.widths
            .windows(2)
            .map(|w| {
                let wo = pos;
                let bo = pos + w[0] * w[1];
                pos = bo + w[1];
                (wo, bo)
            })
            .collect()
    }

    fn check_index(&self, idx: Indices) -> Result<()> {
        if idx.drug_a >= self.n_drugs || idx.drug_b >= self.n_drugs || idx.cell >= self.n_cells {
            return Err(Error::validation(format!(
                "index {idx:?} out of range for {} drugs and {} cells",
                self.n_drugs, self.n_cells
            )));
        }
        Ok(())
    }

    /// The concatenated `[drug_a, drug_b, cell]` embedding input.
    pub fn embed(&self, idx: Indices) -> Result<Vec<f64>> {
        let idx = Indices::new(idx.drug_a, idx.drug_b, idx.cell);
        self.check_index(idx)?;
        let d = self.d_emb;
        let mut x = Vec::with_capacity(3 * d);
        for off in [self.drug_offset(idx.drug_a), self.drug_offset(idx.drug_b), self.cell_offset(idx.cell)] {
            x.extend_from_slice(&self.params[off..off + d]);
        }
        Ok(x)
    }

    /// Runs the network on an explicit input of width `3 * d_emb`.
    pub fn forward_input(&self, x: Vec<f64>) -> (Vec<Vec<f64>>, Vec<Vec<f64>>, f64) {
        debug_assert_eq!(x.len(), self.widths[0]);
        let mut x = x;
        let offsets = self.layer_offsets();
        let last = offsets.len() - 1;
        let mut inputs = Vec::with_capacity(offsets.len());
        let mut pre = Vec::with_capacity(offsets.len());
        for (l, (w, &(wo, bo))) in self.widths.windows(2).zip(&offsets).enumerate() {
            let (n_in, n_out) = (w[0], w[1]);
            let z: Vec<f64> = (0..n_out)
                .map(|o| {
                    let row = &self.params[wo + o * n_in..wo + (o + 1) * n_in];
                    self.params[bo + o] + row.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>()
                })
                .collect();
            let next = if l == last { Vec::new() } else { z.iter().map(|&v| leaky(v)).collect() };
            inputs.push(std::mem::replace(&mut x, next));
            pre.push(z);
        }
        let p = sigmoid(pre[last][0]);
        (inputs, pre, p)
    }

    pub fn forward_trace(&self, idx: Indices) -> Result<Trace> {
        let idx = Indices::new(idx.drug_a, idx.drug_b, idx.cell);
        let (inputs, pre, p) = self.forward_input(self.embed(idx)?);
        Ok(Trace { idx, inputs, pre, p })
    }

    pub fn forward(&self, idx: Indices) -> Result<f64> {
        Ok(self.forward_trace(idx)?.p)
    }

    /// Accumulates `dL/dθ` into `grad` given `dL/dz` at the output logit.
    pub fn backward(&self, trace: &Trace, dz_out: f64, grad: &mut [f64]) {
        let offsets = self.layer_offsets();
        let mut delta = vec![dz_out];
        for l in (0..offsets.len()).rev() {
            let (wo, bo) = offsets[l];
            let n_in = self.widths[l];
            let input = &trace.inputs[l];
            for (o, &g) in delta.iter().enumerate() {
                grad[bo + o] += g;
                let row = &mut grad[wo + o * n_in..wo + (o + 1) * n_in];
                for (r, &xi) in row.iter_mut().zip(input) {
                    *r += g * xi;
                }
            }
            let mut back = vec![0.0; n_in];
            for (o, &g) in delta.iter().enumerate() {
                let row = &self.params[wo + o * n_in..wo + (o + 1) * n_in];
                for (b, &w) in back.iter_mut().zip(row) {
                    *b += g * w;
                }
            }
            if l > 0 {
                for (b, &z) in back.iter_mut().zip(&trace.pre[l - 1]) {
                    *b *= leaky_grad(z);
                }
            }
            delta = back;
        }
        let d = self.d_emb;
        let idx = trace.idx;
        for (k, off) in [self.drug_offset(idx.drug_a), self.drug_offset(idx.drug_b), self.cell_offset(idx.cell)]
            .into_iter()
            .enumerate()
        {
            for j in 0..d {
                grad[off + j] += delta[k * d + j];
            }
        }
    }
}

/// Loss contribution of one row and its derivative with respect to the
/// output logit.
///
/// Original rows use binary cross-entropy; synthetic rows use `-w log p`
/// (or `+w log p` under [`SyntheticSign::Literal`]). Clamping applies to the
/// value only.
pub fn row_loss(p: f64, t: Target, sign: SyntheticSign) -> (f64, f64) {
    let pc = p.clamp(P_CLAMP, 1.0 - P_CLAMP);
    if t.synthetic {
        let s = match sign {
            SyntheticSign::Corrected => 1.0,
            SyntheticSign::Literal => -1.0,
        };
        (-s * t.weight * pc.ln(), s * t.weight * (p - 1.0))
    } else {
        let l = -(t.label * pc.ln() + (1.0 - t.label) * (1.0 - pc).ln());
        (t.weight * l, t.weight * (p - t.label))
    }
}

/// Summed loss over a batch.
pub fn batch_loss(model: &SynergyModel, batch: &[(Indices, Target)], sign: SyntheticSign) -> Result<f64> {
    let mut total = 0.0;
    for &(idx, t) in batch {
        total += row_loss(model.forward(idx)?, t, sign).0;
    }
    Ok(total)
}

/// Summed loss and its gradient over a batch, accumulated in batch order.
pub fn loss_and_grad(
    model: &SynergyModel,
    batch: &[(Indices, Target)],
    sign: SyntheticSign,
    grad: &mut [f64],
) -> Result<f64> {
    grad.iter_mut().for_each(|g| *g = 0.0);
    let mut total = 0.0;
    for &(idx, t) in batch {
        let trace = model.forward_trace(idx)?;
        let (l, dz) = row_loss(trace.p, t, sign);
        total += l;
        model.backward(&trace, dz, grad);
    }
    Ok(total)
}
