use litaug_core::template::{distance_matrix, k_medoids, Distance};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{ensure, Outcome};

fn points(rng: &mut ChaCha8Rng, n: usize) -> Vec<Vec<f64>> {
    let dim = rng.random_range(1..5);
    (0..n)
        .map(|_| (0..dim).map(|_| rng.random_range(-5.0..5.0)).collect())
        .collect()
}

fn cost_of(d: &[f64], n: usize, medoids: &[usize]) -> f64 {
    (0..n)
        .map(|j| medoids.iter().map(|&m| d[m * n + j]).fold(f64::INFINITY, f64::min))
        .sum()
}

/// Lowest cost over every k-subset.
fn exhaustive(d: &[f64], n: usize, k: usize) -> f64 {
    fn go(d: &[f64], n: usize, k: usize, from: usize, chosen: &mut Vec<usize>, best: &mut f64) {
        if chosen.len() == k {
            *best = best.min(cost_of(d, n, chosen));
            return;
        }
        for i in from..n {
            chosen.push(i);
            go(d, n, k, i + 1, chosen, best);
            chosen.pop();
        }
    }
    let mut best = f64::INFINITY;
    go(d, n, k, 0, &mut Vec::new(), &mut best);
    best
}

fn check_sound(pts: &[Vec<f64>], k: usize, metric: Distance) -> Result<(), String> {
    let n = pts.len();
    let c = k_medoids(pts, k, 10_000, metric).map_err(|e| e.to_string())?;
    let d = distance_matrix(pts, metric);
    ensure!(c.medoids.len() == k, "{} medoids for k = {k}", c.medoids.len());
    ensure!(c.medoids.windows(2).all(|w| w[0] < w[1]), "medoids not distinct and ascending");
    ensure!(c.medoids.iter().all(|&m| m < n), "medoid index out of range");
    ensure!(c.assignment.len() == n, "assignment length {}", c.assignment.len());
    for (pos, &m) in c.medoids.iter().enumerate() {
        ensure!(c.assignment[m] == pos, "medoid {m} not in its own cluster");
    }
    let mut total = 0.0;
    for j in 0..n {
        let own = d[c.medoids[c.assignment[j]] * n + j];
        let best = c.medoids.iter().map(|&m| d[m * n + j]).fold(f64::INFINITY, f64::min);
        ensure!(own <= best, "point {j} is not assigned to a nearest medoid");
        total += own;
    }
    ensure!(
        (total - c.total_cost).abs() <= 1e-9 * total.max(1.0),
        "reported cost {} but assignment costs {total}",
        c.total_cost
    );
    ensure!(
        c.cost_trace.windows(2).all(|w| w[1] <= w[0]),
        "cost increased: {:?}",
        c.cost_trace
    );
    let last = *c.cost_trace.last().ok_or("empty cost trace")?;
    ensure!(
        (last - c.total_cost).abs() <= 1e-9 * total.max(1.0),
        "trace ends at {last}, final cost {}",
        c.total_cost
    );
    Ok(())
}

pub fn run() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for i in 0..100 {
        let n = rng.random_range(2..60);
        let k = rng.random_range(1..=n.min(8));
        let metric = if i % 2 == 0 { Distance::Euclidean } else { Distance::Cosine };
        let pts = points(&mut rng, n);
        check_sound(&pts, k, metric).map_err(|e| format!("instance {i} (n {n}, k {k}): {e}"))?;
    }
    let mut optimal = 0;
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(10_000 + seed);
        let n = rng.random_range(3..=10);
        let k = rng.random_range(1..=3);
        let pts = points(&mut rng, n);
        check_sound(&pts, k, Distance::Euclidean).map_err(|e| format!("small run {seed}: {e}"))?;
        let c = k_medoids(&pts, k, 10_000, Distance::Euclidean).map_err(|e| e.to_string())?;
        let d = distance_matrix(&pts, Distance::Euclidean);
        let best = exhaustive(&d, n, k);
        if c.total_cost <= best + 1e-9 * best.max(1.0) {
            optimal += 1;
        }
    }
    ensure!(optimal >= 80, "exhaustive optimum reached in {optimal} of 100 runs");
    Ok(format!("100 sound instances, optimum in {optimal}/100 small runs"))
}
