use litaug_core::classifier::{batch_loss, loss_and_grad, Indices, SynergyModel, SyntheticSign, Target};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{ensure, Outcome};

fn random_case(seed: u64) -> (SynergyModel, Vec<(Indices, Target)>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_drugs = rng.random_range(2..7);
    let n_cells = rng.random_range(1..4);
    let d_emb = rng.random_range(1..5);
    let hidden: Vec<usize> = (0..rng.random_range(1..4)).map(|_| rng.random_range(1..7)).collect();
    let drugs: Vec<String> = (0..n_drugs).map(|i| format!("d{i}")).collect();
    let cells: Vec<String> = (0..n_cells).map(|i| format!("c{i}")).collect();
    let mut model = SynergyModel::init(&drugs, &cells, d_emb, &hidden, seed);
    for p in model.params.iter_mut() {
        *p += rng.random_range(-0.2..0.2);
    }
    let batch = (0..rng.random_range(1..9))
        .map(|_| {
            let a = rng.random_range(0..n_drugs);
            let mut b = rng.random_range(0..n_drugs);
            while b == a {
                b = rng.random_range(0..n_drugs);
            }
            let synthetic = rng.random_bool(0.4);
            let target = Target {
                label: if synthetic || rng.random_bool(0.5) { 1.0 } else { 0.0 },
                weight: if synthetic { rng.random_range(0.05..1.0) } else { 1.0 },
                synthetic,
            };
            (Indices::new(a, b, rng.random_range(0..n_cells)), target)
        })
        .collect();
    (model, batch)
}

fn max_rel_error(model: &SynergyModel, batch: &[(Indices, Target)]) -> Result<f64, String> {
    let sign = SyntheticSign::Corrected;
    let h = 1e-5;
    let mut grad = vec![0.0; model.param_count()];
    loss_and_grad(model, batch, sign, &mut grad).map_err(|e| e.to_string())?;
    let mut m = model.clone();
    let mut worst: f64 = 0.0;
    for i in 0..m.params.len() {
        let orig = m.params[i];
        m.params[i] = orig + h;
        let up = batch_loss(&m, batch, sign).map_err(|e| e.to_string())?;
        m.params[i] = orig - h;
        let down = batch_loss(&m, batch, sign).map_err(|e| e.to_string())?;
        m.params[i] = orig;
        let fd = (up - down) / (2.0 * h);
        let denom = fd.abs().max(grad[i].abs()).max(1e-6);
        worst = worst.max((fd - grad[i]).abs() / denom);
    }
    Ok(worst)
}

pub fn run() -> Outcome {
    let mut worst: f64 = 0.0;
    for seed in 0..50 {
        let (model, batch) = random_case(1000 + seed);
        let err = max_rel_error(&model, &batch)?;
        ensure!(err < 1e-4, "model {seed}: relative error {err:.3e}");
        worst = worst.max(err);
    }
    Ok(format!("50 models, max relative error {worst:.2e}"))
}
