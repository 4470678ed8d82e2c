//! `arta`: train, score, evaluate and stress-test anomaly detectors from the
//! command line.
//!
//! Exit codes: 0 success, 2 usage/configuration/input errors, 3 numeric
//! failure, 4 metric undefined for the given labels.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use arta_core::ArtaError;
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "arta",
    version,
    about = "Adversarially robust anomaly detection for multivariate time series"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a detector (and generator) on the leading split of a CSV series.
    Train(TrainArgs),
    /// Score every timestamp of a series with a trained model.
    Score(ScoreArgs),
    /// Compute detection metrics from a scores CSV.
    Eval(EvalArgs),
    /// Inject noise into a series.
    Corrupt(CorruptArgs),
    /// Score and evaluate a model across a grid of noise severities.
    Sweep(SweepArgs),
    /// Empirical Lipschitz estimate and score-stability report.
    Stability(StabilityArgs),
    /// Generate the labelled synthetic benchmark series.
    Synth(SynthArgs),
}

#[derive(Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// key=value configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Per-epoch report CSV (defaults to `<out>.report.csv`).
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// no_generator, no_adversarial, no_sparsity, no_baseline or full; repeatable.
    #[arg(long)]
    pub ablation: Vec<String>,
    /// Extra key=value overrides applied after the config file; repeatable.
    #[arg(long = "set")]
    pub overrides: Vec<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, short)]
    pub quiet: bool,
}

#[derive(Args)]
pub struct ScoreArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// detector, mask_weighted or sensitivity_gap.
    #[arg(long, default_value = "detector")]
    pub strategy: String,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct GridArgs {
    /// Number of threshold steps I.
    #[arg(long = "I", default_value_t = 50)]
    pub thresholds: usize,
    /// Number of tolerance slices J.
    #[arg(long = "J", default_value_t = 10)]
    pub slices: usize,
    /// Largest tolerance.
    #[arg(long, default_value_t = 20)]
    pub lmax: usize,
}

#[derive(Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub scores: PathBuf,
    /// Labelled data CSV, when the scores file has no label column.
    #[arg(long)]
    pub labels_from: Option<PathBuf>,
    /// all, auc_pr, auc_roc, vus_pr, vus_roc or f1; repeatable.
    #[arg(long, default_value = "all")]
    pub metric: Vec<String>,
    #[command(flatten)]
    pub grid: GridArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write the surfaces as `<prefix>_pr_{precision,recall}.csv` and
    /// `<prefix>_roc_{fpr,tpr}.csv`.
    #[arg(long)]
    pub surface_prefix: Option<PathBuf>,
    /// Seed echoed into the output header.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args)]
pub struct CorruptArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// gaussian, colored or salt_pepper.
    #[arg(long)]
    pub noise: String,
    #[arg(long)]
    pub snr: Option<f64>,
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long, default_value_t = 0.5)]
    pub rho: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// First row to corrupt (defaults to 0, the whole series).
    #[arg(long, default_value_t = 0)]
    pub start: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// gaussian, colored or salt_pepper.
    #[arg(long)]
    pub noise: String,
    /// Comma-separated severities (SNR in dB or probabilities); defaults to
    /// 30,25,20,15,10 dB or 0.01,0.05,0.10,0.15,0.20.
    #[arg(long)]
    pub grid: Option<String>,
    #[arg(long, default_value_t = 0.5)]
    pub rho: f64,
    #[arg(long, default_value = "detector")]
    pub strategy: String,
    #[command(flatten)]
    pub metric_grid: GridArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct StabilityArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = 0.1)]
    pub eps: f64,
    #[arg(long, default_value_t = 1000)]
    pub trials: usize,
    /// Perturbation pairs for the Lipschitz estimate.
    #[arg(long, default_value_t = 1000)]
    pub pairs: usize,
    /// Windows sampled from the series.
    #[arg(long, default_value_t = 32)]
    pub windows: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 5000)]
    pub len: usize,
    #[arg(long, default_value_t = 5)]
    pub features: usize,
    #[arg(long, default_value_t = 20)]
    pub anomalies: usize,
    /// Minimum spacing between injected anomalies.
    #[arg(long, default_value_t = 100)]
    pub min_gap: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

fn exit_code(e: &ArtaError) -> u8 {
    match e {
        ArtaError::Numeric { .. } => 3,
        ArtaError::Evaluation(_) => 4,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(a) => commands::train(a),
        Command::Score(a) => commands::score(a),
        Command::Eval(a) => commands::eval(a),
        Command::Corrupt(a) => commands::corrupt(a),
        Command::Sweep(a) => commands::sweep(a),
        Command::Stability(a) => commands::stability(a),
        Command::Synth(a) => commands::synth(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
