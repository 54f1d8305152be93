use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use litaug_core::augment::{
    cluster_templates, fill_pool, latest_checkpoint, load_dataset, load_seed_vocab, mine_templates, read_checkpoint,
    run_pipeline, AugmentMode, Inputs, IterationStats, PipelineState, RunOptions,
};
use litaug_core::classifier::{grid_search, Classifier, TrainConfig};
use litaug_core::config::Config;
use litaug_core::corpus::{audit_leakage, load_corpus, mine_candidates, Matcher};
use litaug_core::dataset::{
    load_query_csv, read_training_csv, write_training_csv, LabeledTriplet, TrainingExample, TrainingSet,
};
use litaug_core::eval::{cross_validate, cv_auprc_scorer, metric_table, table_csv, SettingResult, SETTINGS};
use litaug_core::gateway::{load_token_vocab, Backend};
use litaug_core::manifest::RunManifest;
use litaug_core::synth::{manual_templates, write_synthetic_jsonl};
use litaug_core::template::{embed_batch, read_templates_jsonl, write_templates_jsonl, PromptTemplate};
use litaug_core::{Error, Result};

use crate::{
    AugmentArgs, AuditArgs, Cli, ClusterArgs, Command, EvaluateArgs, ExportArgs, OutArgs, PredictArgs,
    SynthesizeArgs, TrainArgs,
};

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Mine(a) => mine(cli, a),
        Command::Cluster(a) => cluster(cli, a),
        Command::Synthesize(a) => synthesize(cli, a),
        Command::Augment(a) => augment(cli, a),
        Command::Train(a) => train(cli, a),
        Command::Predict(a) => predict(a),
        Command::Evaluate(a) => evaluate(cli, a),
        Command::AuditLeakage(a) => audit(cli, a),
        Command::ExportEmbeddings(a) => export(cli, a),
    }
}

/// The config with command-line overrides applied.
fn load_config(cli: &Cli) -> Result<Config> {
    let mut config = Config::load(&cli.config)?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
        config.train.seed = seed;
    }
    if let Some(url) = &cli.gateway_url {
        config.gateway.backend = match config.gateway.backend {
            Backend::Http {
                timeout_secs,
                max_retries,
                batch_size,
                max_in_flight,
                ..
            } => Backend::Http {
                base_url: url.clone(),
                timeout_secs,
                max_retries,
                batch_size,
                max_in_flight,
            },
            Backend::Mock { .. } => Backend::Http {
                base_url: url.clone(),
                timeout_secs: 30.0,
                max_retries: 3,
                batch_size: 32,
                max_in_flight: 8,
            },
        };
    }
    Ok(config)
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn to_json<T: serde::Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("value serializes") + "\n"
}

/// Tracks a command's inputs, outputs and timing for its manifest.
struct Run {
    manifest: RunManifest,
    started: Instant,
    out: PathBuf,
}

impl Run {
    fn start(command: &str, config: Option<&Config>, seed: u64, out: &Path) -> Result<Self> {
        create_dir(out)?;
        let snapshot = config.map_or(serde_json::Value::Null, |c| serde_json::to_value(c).expect("config serializes"));
        Ok(Run {
            manifest: RunManifest::new(command, seed, snapshot),
            started: Instant::now(),
            out: out.to_path_buf(),
        })
    }

    fn input(&mut self, path: &Path) -> Result<()> {
        self.manifest.add_input(path)
    }

    fn config_inputs(&mut self, config: &Config) -> Result<()> {
        self.input(&config.corpus.path)?;
        for p in &config.vocab.paths {
            self.input(p)?;
        }
        self.input(&config.dataset.path)?;
        self.input(&config.gateway.token_vocab)
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn output(&mut self, name: &str, text: &str) -> Result<()> {
        let path = self.path(name);
        write_file(&path, text)?;
        self.manifest.add_output(&path)
    }

    fn record(&mut self, name: &str) -> Result<()> {
        let path = self.path(name);
        self.manifest.add_output(&path)
    }

    fn finish(mut self) -> Result<()> {
        self.manifest
            .timings
            .insert("total_seconds".into(), self.started.elapsed().as_secs_f64());
        self.manifest.write(&self.out)?;
        Ok(())
    }
}

fn mine(cli: &Cli, a: &OutArgs) -> Result<()> {
    let config = load_config(cli)?;
    let mut run = Run::start("mine", Some(&config), config.seed, &a.out)?;
    run.config_inputs(&config)?;
    let tokens: BTreeSet<String> = load_token_vocab(&config.gateway.token_vocab)?.into_iter().collect();
    let dataset = load_dataset(&config, &tokens)?;
    let vocab = load_seed_vocab(&config, &dataset)?;
    let corpus = load_corpus(&config.corpus.path)?;
    let mined = mine_candidates(&corpus, &Matcher::new(&vocab)?, &config.corpus.keywords);
    let mut lines = String::new();
    for m in &mined {
        lines.push_str(&serde_json::to_string(m).expect("sentence serializes"));
        lines.push('\n');
    }
    run.output("mined.jsonl", &lines)?;
    let (_, templates) = mine_templates(&corpus, &vocab, &config)?;
    write_templates_jsonl(run.path("templates.jsonl"), &templates)?;
    run.record("templates.jsonl")?;
    log::info!("mined {} sentences, {} distinct templates", mined.len(), templates.len());
    run.finish()
}

fn cluster(cli: &Cli, a: &ClusterArgs) -> Result<()> {
    let config = load_config(cli)?;
    let mut run = Run::start("cluster", Some(&config), config.seed, &a.out)?;
    run.input(&a.templates)?;
    run.input(&config.gateway.token_vocab)?;
    let candidates = read_templates_jsonl(&a.templates)?;
    let tokens = load_token_vocab(&config.gateway.token_vocab)?;
    let gateway = config.gateway.connect(&tokens)?;
    let medoids = cluster_templates(gateway.as_ref(), &candidates, &config, a.iteration)?;
    write_templates_jsonl(run.path("templates.jsonl"), &medoids)?;
    run.record("templates.jsonl")?;
    run.finish()
}

fn write_state(run: &mut Run, state: &PipelineState) -> Result<()> {
    write_synthetic_jsonl(run.path("synthetic.jsonl"), &state.synthetic)?;
    run.record("synthetic.jsonl")?;
    write_templates_jsonl(run.path("templates.jsonl"), &state.template_pool)?;
    run.record("templates.jsonl")?;
    run.output("vocab.tsv", &state.vocab.to_tsv())?;
    write_training_csv(run.path("training.csv"), &state.training_set())?;
    run.record("training.csv")?;
    run.output("stats.json", &to_json(&state.stats))
}

fn synthesize(cli: &Cli, a: &SynthesizeArgs) -> Result<()> {
    let config = load_config(cli)?;
    let mut run = Run::start("synthesize", Some(&config), config.seed, &a.out)?;
    run.config_inputs(&config)?;
    let templates = match &a.templates {
        Some(p) => {
            run.input(p)?;
            read_templates_jsonl(p)?
        }
        None => manual_templates(),
    };
    let inputs = Inputs::load(&config)?;
    let options = RunOptions {
        mode: if a.restricted {
            AugmentMode::Restricted
        } else {
            AugmentMode::Iterative
        },
        no_warm_start: a.no_warm_start,
        seed: config.seed,
    };
    let mut state = PipelineState::new(options, inputs.vocab.clone(), inputs.dataset.clone());
    state.template_pool = templates;
    let mut stats = IterationStats {
        iteration: 1,
        pool_size: state.template_pool.len(),
        ..Default::default()
    };
    fill_pool(&mut state, &inputs, &config, &mut stats)?;
    state.iteration = 1;
    state.stats.push(stats);
    write_state(&mut run, &state)?;
    run.finish()
}

fn augment(cli: &Cli, a: &AugmentArgs) -> Result<()> {
    let config = load_config(cli)?;
    let mut run = Run::start("augment", Some(&config), config.seed, &a.out)?;
    run.config_inputs(&config)?;
    let inputs = Inputs::load(&config)?;
    let options = RunOptions {
        mode: a.mode,
        no_warm_start: a.no_warm_start,
        seed: config.seed,
    };
    let ck_dir = a.out.join("checkpoints");
    let mut state = PipelineState::new(options, inputs.vocab.clone(), inputs.dataset.clone());
    if a.resume {
        if let Some(path) = latest_checkpoint(&ck_dir)? {
            state = read_checkpoint(&path, &config, options, &inputs.dataset)?;
            log::info!("resuming after iteration {} from {}", state.iteration, path.display());
        }
    }
    let ck = if config.iteration.checkpoint {
        create_dir(&ck_dir)?;
        Some(ck_dir.as_path())
    } else {
        None
    };
    let state = run_pipeline(state, &inputs, &config, ck)?;
    write_state(&mut run, &state)?;
    run.finish()
}

/// Originals and synthetic rows of a training CSV.
fn split_training(set: &TrainingSet) -> (Vec<LabeledTriplet>, Vec<TrainingExample>) {
    let originals = set
        .iter()
        .filter(|e| !e.is_synthetic)
        .map(|e| LabeledTriplet {
            triplet: e.triplet.clone(),
            label: e.label,
        })
        .collect();
    let synthetic = set.iter().filter(|e| e.is_synthetic).cloned().collect();
    (originals, synthetic)
}

fn train(cli: &Cli, a: &TrainArgs) -> Result<()> {
    let config = load_config(cli)?;
    let mut run = Run::start("train", Some(&config), config.train.seed, &a.out)?;
    run.input(&a.training)?;
    let set = read_training_csv(&a.training)?;
    let mut train_cfg = config.train.clone();
    let mut grid_scores = Vec::new();
    if a.grid {
        let (data, synthetic) = split_training(&set);
        let eval = litaug_core::eval::EvalConfig {
            split: litaug_core::eval::SplitMode::Standard,
            ..config.eval.clone()
        };
        let outcome = grid_search(&config.grid, &train_cfg, cv_auprc_scorer(&data, &synthetic, &eval, config.seed))?;
        log::info!("grid search picked lr {} hidden {}", outcome.best.learning_rate, outcome.best.hidden_dim);
        train_cfg = outcome.best;
        grid_scores = outcome.scores.into_iter().map(|(c, s)| serde_json::json!({"config": c, "cv_auprc": s})).collect();
    }
    let (clf, report) = Classifier::fit(&set, &[], &train_cfg)?;
    clf.save(run.path("model.json"))?;
    run.record("model.json")?;
    run.output(
        "report.json",
        &to_json(&serde_json::json!({
            "config": train_cfg,
            "param_count": report.param_count,
            "loss_trace": report.loss_trace,
            "grid": grid_scores,
        })),
    )?;
    run.finish()
}

fn predict(a: &PredictArgs) -> Result<()> {
    let clf = Classifier::load(&a.model)?;
    let rows = load_query_csv(&a.input)?;
    let mut out = String::from("drug_a,drug_b,cell_line,score,prediction\n");
    for (t, _) in &rows {
        let p = clf.score(t);
        let _ = writeln!(out, "{},{},{},{p},{}", t.drug_a, t.drug_b, t.cell, litaug_core::classifier::predict(p));
    }
    match &a.output {
        Some(path) => write_file(path, &out),
        None => {
            print!("{out}");
            Ok(())
        }
    }
}

fn evaluate(cli: &Cli, a: &EvaluateArgs) -> Result<()> {
    let mut config = load_config(cli)?;
    if let Some(split) = a.split {
        config.eval.split = split;
    }
    if let Some(r) = a.repeats {
        config.eval.repeats = r;
    }
    let mut run = Run::start("evaluate", Some(&config), config.seed, &a.out)?;
    let mut train_cfg: TrainConfig = config.train.clone();
    if let Some(m) = &a.model {
        run.input(m)?;
        train_cfg = Classifier::load(m)?.config;
        if cli.seed.is_some() {
            train_cfg.seed = config.train.seed;
        }
    }
    run.input(&config.dataset.path)?;
    run.input(&config.gateway.token_vocab)?;
    let tokens: BTreeSet<String> = load_token_vocab(&config.gateway.token_vocab)?.into_iter().collect();
    let data = load_dataset(&config, &tokens)?;
    let data_set: BTreeSet<_> = data.iter().map(|r| (r.triplet.clone(), r.label)).collect();

    let mut settings: Vec<(String, Vec<TrainingExample>)> = vec![(SETTINGS[0].to_string(), Vec::new())];
    for (name, path) in &a.settings {
        if settings.iter().any(|(n, _)| n == name) {
            return Err(Error::validation(format!("setting {name:?} given twice")));
        }
        run.input(path)?;
        let set = read_training_csv(path)?;
        let (originals, synthetic) = split_training(&set);
        let theirs: BTreeSet<_> = originals.into_iter().map(|r| (r.triplet, r.label)).collect();
        if theirs != data_set {
            return Err(Error::validation(format!(
                "{}: original rows differ from the configured dataset",
                path.display()
            )));
        }
        settings.push((name.clone(), synthetic));
    }
    settings.sort_by_key(|(n, _)| SETTINGS.iter().position(|s| s == n).unwrap_or(SETTINGS.len()));

    let mut results = Vec::new();
    for (name, synthetic) in &settings {
        let folds = cross_validate(&data, synthetic, &config.eval, &train_cfg, config.seed)?;
        results.push(SettingResult {
            setting: name.clone(),
            folds,
        });
    }
    let rows = metric_table(&results)?;
    run.output("metrics.csv", &table_csv(&rows))?;
    run.output("metrics.json", &to_json(&rows))?;
    run.output("folds.json", &to_json(&results))?;
    run.finish()
}

fn audit(cli: &Cli, a: &AuditArgs) -> Result<()> {
    let config = load_config(cli)?;
    let mut run = Run::start("audit-leakage", Some(&config), config.seed, &a.out)?;
    run.config_inputs(&config)?;
    let tokens: BTreeSet<String> = load_token_vocab(&config.gateway.token_vocab)?.into_iter().collect();
    let dataset = load_dataset(&config, &tokens)?;
    let vocab = load_seed_vocab(&config, &dataset)?;
    let corpus = load_corpus(&config.corpus.path)?;
    let report = audit_leakage(&corpus, &Matcher::new(&vocab)?, &dataset, &a.k);
    run.output("leakage.json", &to_json(&report))?;
    run.output("leakage.csv", &report.to_csv())?;
    run.finish()
}

fn tsv_rows<'a>(rows: impl Iterator<Item = (String, &'a [f64])>) -> String {
    let mut out = String::new();
    for (name, v) in rows {
        out.push_str(&name);
        for x in v {
            let _ = write!(out, "\t{x}");
        }
        out.push('\n');
    }
    out
}

fn export(cli: &Cli, a: &ExportArgs) -> Result<()> {
    if a.templates.is_none() && a.model.is_none() {
        return Err(Error::validation("export-embeddings needs --templates, --model or both"));
    }
    let config = match &a.templates {
        Some(_) => Some(load_config(cli)?),
        None => None,
    };
    let mut run = Run::start("export-embeddings", config.as_ref(), cli.seed.unwrap_or(0), &a.out)?;
    if let (Some(path), Some(config)) = (&a.templates, &config) {
        run.input(path)?;
        let templates: Vec<PromptTemplate> = read_templates_jsonl(path)?;
        let tokens = load_token_vocab(&config.gateway.token_vocab)?;
        let gateway = config.gateway.connect(&tokens)?;
        let vectors = embed_batch(gateway.as_ref(), &templates)?;
        let rows = templates.iter().zip(&vectors).map(|(t, v)| (t.template_id.clone(), v.as_slice()));
        run.output("template_embeddings.tsv", &tsv_rows(rows))?;
    }
    if let Some(path) = &a.model {
        run.input(path)?;
        let clf = Classifier::load(path)?;
        let m = &clf.model;
        let d = m.d_emb;
        let drugs = clf
            .drugs
            .iter()
            .enumerate()
            .map(|(i, name)| (name.clone(), &m.params[m.drug_offset(i)..m.drug_offset(i) + d]));
        run.output("drug_embeddings.tsv", &tsv_rows(drugs))?;
        let cells = clf
            .cells
            .iter()
            .enumerate()
            .map(|(i, name)| (name.clone(), &m.params[m.cell_offset(i)..m.cell_offset(i) + d]));
        run.output("cell_embeddings.tsv", &tsv_rows(cells))?;
    }
    run.finish()
}
