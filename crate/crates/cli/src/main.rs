mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use litaug_core::augment::AugmentMode;
use litaug_core::eval::SplitMode;
use litaug_core::Error;

/// Literature-mined prompt augmentation for drug-synergy classification.
#[derive(Debug, Parser)]
#[command(name = "litaug", version)]
pub struct Cli {
    /// Pipeline configuration (TOML).
    #[arg(long, global = true, default_value = "litaug.toml")]
    pub config: PathBuf,
    /// Overrides the configured run and training seeds.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for parallel stages (defaults to all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Base URL of a model server; replaces the configured gateway backend.
    #[arg(long, global = true, env = "LITAUG_GATEWAY_URL", hide_env_values = true)]
    pub gateway_url: Option<String>,
    /// Log more (repeat for debug output).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Mine synergy sentences and their masked templates from the corpus.
    Mine(OutArgs),
    /// Cluster candidate templates and keep the medoids.
    Cluster(ClusterArgs),
    /// Fill a template set once and write the synthetic triplets.
    Synthesize(SynthesizeArgs),
    /// Run the full augmentation loop.
    Augment(AugmentArgs),
    /// Train the synergy classifier on a training set.
    Train(TrainArgs),
    /// Score triplets with a trained classifier.
    Predict(PredictArgs),
    /// Cross-validate augmentation settings and write the metric table.
    Evaluate(EvaluateArgs),
    /// Count dataset entities, pairs and triplets co-occurring in the corpus.
    AuditLeakage(AuditArgs),
    /// Write template or entity embedding matrices as TSV.
    ExportEmbeddings(ExportArgs),
}

#[derive(Debug, Args)]
pub struct OutArgs {
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ClusterArgs {
    /// Candidate templates (JSON lines), e.g. the output of `mine`.
    #[arg(long)]
    pub templates: PathBuf,
    /// Iteration number recorded in the medoid provenance.
    #[arg(long, default_value_t = 1)]
    pub iteration: usize,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SynthesizeArgs {
    /// Templates to fill; the built-in manual templates when omitted.
    #[arg(long)]
    pub templates: Option<PathBuf>,
    /// Restrict fills to valid drug and cell line names.
    #[arg(long)]
    pub restricted: bool,
    /// Fill templates cold instead of warm-starting from dataset triplets.
    #[arg(long)]
    pub no_warm_start: bool,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct AugmentArgs {
    /// manual, iterative or restricted.
    #[arg(long, value_parser = parse_mode)]
    pub mode: AugmentMode,
    /// Fill templates cold instead of warm-starting from sampled triplets.
    #[arg(long)]
    pub no_warm_start: bool,
    /// Continue from the latest checkpoint in the output directory.
    #[arg(long)]
    pub resume: bool,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Training set CSV written by `augment` or `synthesize`.
    #[arg(long)]
    pub training: PathBuf,
    /// Pick hyperparameters by cross-validated AUPRC over the configured grid.
    #[arg(long)]
    pub grid: bool,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    /// Model file written by `train`.
    #[arg(long)]
    pub model: PathBuf,
    /// CSV with drug_a, drug_b and cell_line columns.
    #[arg(long)]
    pub input: PathBuf,
    /// Output CSV; standard output when omitted.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// A setting to compare, as NAME=TRAINING_CSV; repeatable. The no-aug
    /// baseline is always included.
    #[arg(long = "training", value_parser = parse_setting)]
    pub settings: Vec<(String, PathBuf)>,
    /// Use the training configuration stored in this model.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// standard, drug, cell or drug-and-cell.
    #[arg(long, value_parser = parse_split)]
    pub split: Option<SplitMode>,
    /// Overrides the configured number of repeats.
    #[arg(long)]
    pub repeats: Option<usize>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct AuditArgs {
    /// Bucket thresholds for the "fewer than k units" fractions.
    #[arg(long, value_delimiter = ',', default_values_t = [1u64, 2, 5, 10, 100])]
    pub k: Vec<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    /// Templates to embed through the gateway.
    #[arg(long)]
    pub templates: Option<PathBuf>,
    /// Classifier whose drug and cell tables to export.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

fn parse_mode(s: &str) -> Result<AugmentMode, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_split(s: &str) -> Result<SplitMode, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_setting(s: &str) -> Result<(String, PathBuf), String> {
    let (name, path) = s.split_once('=').ok_or("expected NAME=PATH")?;
    if name.is_empty() || path.is_empty() {
        return Err("expected NAME=PATH".into());
    }
    Ok((name.to_string(), PathBuf::from(path)))
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io { .. } => 2,
        Error::Gateway(_) => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .target(env_logger::Target::Stderr)
        .init();
    if let Some(n) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global() {
            eprintln!("error: cannot start {n} workers: {e}");
            return ExitCode::from(1);
        }
    }
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
