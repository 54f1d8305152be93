//! PAM k-medoids: greedy BUILD initialization followed by best-improvement
//! SWAP until no single medoid/non-medoid exchange lowers the total cost.
//!
//! Every tie is broken towards the lower point index, so results are a pure
//! function of the input.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Distance {
    #[default]
    Euclidean,
    /// `1 - cos(a, b)`; a zero vector is at distance 1 from everything else.
    Cosine,
}

impl Distance {
    pub fn eval(self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Distance::Euclidean => a
                .iter()
                .zip(b)
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt(),
            Distance::Cosine => {
                let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
                let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
                let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
                if na == 0.0 && nb == 0.0 {
                    0.0
                } else if na == 0.0 || nb == 0.0 {
                    1.0
                } else {
                    (1.0 - dot / (na * nb)).max(0.0)
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Clustering {
    pub k: usize,
    /// Point indices of the medoids, ascending; cluster `c` is `medoids[c]`.
    pub medoids: Vec<usize>,
    /// Cluster id of each point.
    pub assignment: Vec<usize>,
    pub total_cost: f64,
    /// Cost after BUILD, then after each applied swap.
    pub cost_trace: Vec<f64>,
    pub swaps: usize,
}

impl Clustering {
    pub fn build_cost(&self) -> f64 {
        self.cost_trace[0]
    }
}

/// Row-major `n x n` pairwise distances.
pub fn distance_matrix(points: &[Vec<f64>], metric: Distance) -> Vec<f64> {
    let n = points.len();
    (0..n)
        .into_par_iter()
        .flat_map_iter(|i| (0..n).map(move |j| if i == j { 0.0 } else { metric.eval(&points[i], &points[j]) }))
        .collect()
}

pub fn k_medoids(
    points: &[Vec<f64>],
    k: usize,
    max_swaps: usize,
    metric: Distance,
) -> Result<Clustering> {
    if let Some(first) = points.first() {
        let dim = first.len();
        if points.iter().any(|p| p.len() != dim) {
            return Err(Error::validation("embedding dimensions differ within one clustering run"));
        }
        if points.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::validation("non-finite embedding entry"));
        }
    }
    let d = distance_matrix(points, metric);
    k_medoids_from_matrix(&d, points.len(), k, max_swaps)
}

struct Nearest {
    /// medoid position of the nearest medoid, and the two smallest distances
    near: Vec<usize>,
    dn: Vec<f64>,
    ds: Vec<f64>,
}

fn nearest(d: &[f64], n: usize, medoids: &[usize]) -> Nearest {
    let mut near = vec![0; n];
    let mut dn = vec![f64::INFINITY; n];
    let mut ds = vec![f64::INFINITY; n];
    for j in 0..n {
        for (pos, &m) in medoids.iter().enumerate() {
            let dist = d[m * n + j];
            if dist < dn[j] {
                ds[j] = dn[j];
                dn[j] = dist;
                near[j] = pos;
            } else if dist < ds[j] {
                ds[j] = dist;
            }
        }
    }
    Nearest { near, dn, ds }
}

pub fn k_medoids_from_matrix(d: &[f64], n: usize, k: usize, max_swaps: usize) -> Result<Clustering> {
    if k == 0 || k > n {
        return Err(Error::validation(format!(
            "k must be in 1..={n} for {n} points, got {k}"
        )));
    }
    debug_assert_eq!(d.len(), n * n);

    // BUILD
    let mut medoids: Vec<usize> = Vec::with_capacity(k);
    let mut is_medoid = vec![false; n];
    let mut dn = vec![f64::INFINITY; n];
    for _ in 0..k {
        let costs: Vec<f64> = (0..n)
            .into_par_iter()
            .map(|c| {
                if is_medoid[c] {
                    f64::INFINITY
                } else {
                    (0..n).map(|j| dn[j].min(d[c * n + j])).sum()
                }
            })
            .collect();
        let best = argmin(&costs);
        medoids.push(best);
        is_medoid[best] = true;
        for j in 0..n {
            dn[j] = dn[j].min(d[best * n + j]);
        }
    }
    let mut cost: f64 = dn.iter().sum();
    let mut trace = vec![cost];

    // SWAP
    let mut swaps = 0;
    while swaps < max_swaps {
        let nn = nearest(d, n, &medoids);
        // best (delta, medoid position) per candidate, then a fixed-order argmin
        let per_candidate: Vec<(f64, usize)> = (0..n)
            .into_par_iter()
            .map(|h| {
                if is_medoid[h] {
                    return (f64::INFINITY, 0);
                }
                let mut best = (f64::INFINITY, 0);
                for pos in 0..k {
                    let mut delta = 0.0;
                    for j in 0..n {
                        let dh = d[h * n + j];
                        let new = if nn.near[j] == pos {
                            dh.min(nn.ds[j])
                        } else {
                            dh.min(nn.dn[j])
                        };
                        delta += new - nn.dn[j];
                    }
                    if delta < best.0 {
                        best = (delta, pos);
                    }
                }
                best
            })
            .collect();
        let deltas: Vec<f64> = per_candidate.iter().map(|c| c.0).collect();
        let h = argmin(&deltas);
        let (delta, pos) = per_candidate[h];
        if !(delta < -1e-10 * cost.max(1.0)) {
            break;
        }
        is_medoid[medoids[pos]] = false;
        is_medoid[h] = true;
        medoids[pos] = h;
        swaps += 1;
        let recomputed: f64 = nearest(d, n, &medoids).dn.iter().sum();
        debug_assert!(recomputed <= cost);
        cost = recomputed;
        trace.push(cost);
    }

    medoids.sort_unstable();
    let mut assignment = vec![0; n];
    let mut total = 0.0;
    for j in 0..n {
        let mut best = (f64::INFINITY, 0);
        for (c, &m) in medoids.iter().enumerate() {
            if m == j {
                best = (0.0, c);
                break;
            }
            let dist = d[m * n + j];
            if dist < best.0 {
                best = (dist, c);
            }
        }
        assignment[j] = best.1;
        total += best.0;
    }

    Ok(Clustering {
        k,
        medoids,
        assignment,
        total_cost: total,
        cost_trace: trace,
        swaps,
    })
}

/// Index of the smallest value; the lowest index wins ties.
fn argmin(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v < values[best] {
            best = i;
        }
    }
    best
}
