use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::OnceLock;

use litaug_core::augment::{load_dataset, load_seed_vocab};
use litaug_core::config::Config;
use litaug_core::gateway::load_token_vocab;
use litaug_core::synth::read_synthetic_jsonl;
use litaug_core::vocab::EntityType;
use serde_json::Value;
use tempfile::TempDir;

use crate::{ensure, Outcome};

fn fixture_config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/litaug.toml")
}

fn augment(mode: &str, jobs: usize, out: &Path) -> Result<(), String> {
    let output = Command::new(env!("CARGO_BIN_EXE_litaug"))
        .arg("--config")
        .arg(fixture_config())
        .args(["--jobs", &jobs.to_string(), "augment", "--mode", mode, "--out"])
        .arg(out)
        .output()
        .map_err(|e| format!("cannot start litaug: {e}"))?;
    ensure!(
        output.status.success(),
        "augment --mode {mode} --jobs {jobs} exited with {}: {}",
        output.status,
        String::from_utf8_lossy(&output.stderr)
    );
    Ok(())
}

struct Runs {
    dir: TempDir,
}

impl Runs {
    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }
}

/// Iterative runs shared by the determinism and monotonicity criteria:
/// two with eight workers and one with a single worker.
fn iterative_runs() -> Result<&'static Runs, String> {
    static RUNS: OnceLock<Result<Runs, String>> = OnceLock::new();
    RUNS.get_or_init(|| {
        let dir = TempDir::new().map_err(|e| e.to_string())?;
        let runs = Runs { dir };
        augment("iterative", 8, &runs.path("a"))?;
        augment("iterative", 8, &runs.path("b"))?;
        augment("iterative", 1, &runs.path("serial"))?;
        Ok(runs)
    })
    .as_ref()
    .map_err(Clone::clone)
}

fn read(path: &Path) -> Result<Vec<u8>, String> {
    std::fs::read(path).map_err(|e| format!("{}: {e}", path.display()))
}

pub fn determinism() -> Outcome {
    let runs = iterative_runs()?;
    let a = read(&runs.path("a/synthetic.jsonl"))?;
    ensure!(!a.is_empty(), "empty synthetic dataset");
    for other in ["b", "serial"] {
        let b = read(&runs.path(&format!("{other}/synthetic.jsonl")))?;
        ensure!(a == b, "synthetic.jsonl of run {other} differs from run a");
        for file in ["templates.jsonl", "training.csv", "stats.json"] {
            ensure!(
                read(&runs.path(&format!("a/{file}")))? == read(&runs.path(&format!("{other}/{file}")))?,
                "{file} of run {other} differs from run a"
            );
        }
    }
    let lines = a.iter().filter(|&&b| b == b'\n').count();
    Ok(format!("3 runs (jobs 8, 8, 1) byte-identical, {lines} synthetic rows"))
}

pub fn monotonicity() -> Outcome {
    let runs = iterative_runs()?;
    let text = String::from_utf8(read(&runs.path("a/stats.json"))?).map_err(|e| e.to_string())?;
    let stats: Vec<Value> = serde_json::from_str(&text).map_err(|e| e.to_string())?;
    ensure!(stats.len() == 3, "{} iterations recorded, expected 3", stats.len());
    let series = |key: &str| -> Result<Vec<u64>, String> {
        stats
            .iter()
            .map(|s| s[key].as_u64().ok_or(format!("stats entry lacks {key}")))
            .collect()
    };
    let pool = series("pool_size")?;
    let synthetic = series("synthetic_size")?;
    ensure!(pool.windows(2).all(|w| w[0] <= w[1]), "template pool shrank: {pool:?}");
    ensure!(synthetic.windows(2).all(|w| w[0] <= w[1]), "synthetic set shrank: {synthetic:?}");
    ensure!(pool[0] > 0 && synthetic[0] > 0, "first iteration produced nothing");
    Ok(format!("pool {pool:?}, synthetic {synthetic:?}"))
}

pub fn restriction() -> Outcome {
    let dir = TempDir::new().map_err(|e| e.to_string())?;
    let out = dir.path().join("restricted");
    augment("restricted", 8, &out)?;
    let config = Config::load(fixture_config()).map_err(|e| e.to_string())?;
    let tokens = load_token_vocab(&config.gateway.token_vocab).map_err(|e| e.to_string())?;
    let dataset = load_dataset(&config, &tokens.into_iter().collect()).map_err(|e| e.to_string())?;
    let vocab = load_seed_vocab(&config, &dataset).map_err(|e| e.to_string())?;
    let drugs = vocab.valid_keys_of_type(EntityType::Drug);
    let cells = vocab.valid_keys_of_type(EntityType::CellLine);
    let rows = read_synthetic_jsonl(out.join("synthetic.jsonl")).map_err(|e| e.to_string())?;
    ensure!(!rows.is_empty(), "restricted run produced no triplets");
    for r in &rows {
        let t = &r.triplet;
        ensure!(
            drugs.contains(&t.drug_a) && drugs.contains(&t.drug_b) && cells.contains(&t.cell),
            "{t} has a component outside the valid entity lists"
        );
    }
    let written = std::fs::read_to_string(out.join("vocab.tsv")).map_err(|e| e.to_string())?;
    ensure!(written == vocab.to_tsv(), "restricted run changed the vocabulary");
    Ok(format!("{} of {} triplets valid", rows.len(), rows.len()))
}
