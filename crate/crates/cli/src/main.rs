mod commands;
mod config;
mod exit;
mod output;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "isenet", version, about = "Dual-lead ECG beat classification with entropy-gated residual networks")]
struct Cli {
    /// TOML run configuration layered over the built-in defaults.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Record cache directory [default: data/mitdb].
    #[arg(long, global = true, env = config::CACHE_ENV, value_name = "DIR")]
    cache_dir: Option<PathBuf>,
    /// Report output directory [default: reports].
    #[arg(long, global = true, env = config::REPORT_ENV, value_name = "DIR")]
    report_dir: Option<PathBuf>,
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Download record files into the cache and verify them.
    Fetch(FetchArgs),
    /// Build the segmented, balanced train/test dataset.
    Prepare(PrepareArgs),
    /// Train a classifier on a prepared dataset.
    Train(TrainArgs),
    /// Confusion matrices and positive-versus-rest metrics.
    Eval(EvalArgs),
    /// Excitation traces and mean square deviations of a trained model.
    Analyze(AnalyzeArgs),
    /// Truncate a trained model and fine-tune a two-class head.
    Segment(SegmentArgs),
    /// Finite-difference check of every differentiable op.
    Gradcheck(GradcheckArgs),
}

#[derive(Args, Debug)]
pub struct FetchArgs {
    /// Record ids, or "all" [default: all].
    records: Vec<String>,
    /// Base URL of the record files [default: https://physionet.org/files/mitdb/1.0.0].
    #[arg(long)]
    base_url: Option<String>,
}

#[derive(Args, Debug)]
pub struct PrepareArgs {
    /// Dataset output directory [default: data/dataset].
    #[arg(long, value_name = "DIR")]
    dataset_dir: Option<PathBuf>,
    /// Leads to keep: mlii, v1 or both [default: both].
    #[arg(long)]
    lead: Option<String>,
    /// Seed for resampling and balancing [default: 0].
    #[arg(long)]
    seed: Option<u64>,
    /// Denoise whole records or single windows: record or window [default: record].
    #[arg(long)]
    denoise_scope: Option<String>,
    /// Balanced per-class train counts N,S,V,F,Q [default: 10000,8000,8000,4000,0].
    #[arg(long, value_delimiter = ',', value_name = "N,S,V,F,Q")]
    balance_targets: Vec<usize>,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Prepared dataset directory [default: data/dataset].
    #[arg(long, value_name = "DIR")]
    dataset_dir: Option<PathBuf>,
    /// Checkpoint and log directory [default: runs/train].
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Weighted layer count, 11 to 26 in steps of 3 [default: 14].
    #[arg(long)]
    depth: Option<u32>,
    /// none, ise_standard, ise_pre or ise_identity [default: ise_standard].
    #[arg(long)]
    attention: Option<String>,
    /// momentum or adam [default: momentum].
    #[arg(long)]
    optimizer: Option<String>,
    /// piecewise or exponential [default: piecewise].
    #[arg(long)]
    schedule: Option<String>,
    /// Base learning rate for the exponential schedule [default: 0.001].
    #[arg(long)]
    lr: Option<f64>,
    /// Mini-batch size [default: 64].
    #[arg(long)]
    batch_size: Option<usize>,
    /// Maximum number of epochs [default: 200].
    #[arg(long)]
    max_epochs: Option<usize>,
    /// Early-stopping patience in epochs [default: 30].
    #[arg(long)]
    patience: Option<usize>,
    /// Seed for initialization and batch order [default: 0].
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Checkpoint directory, or a training directory with selected.json [default: runs/train].
    #[arg(long, value_name = "DIR")]
    checkpoint: Option<PathBuf>,
    /// Prepared dataset directory [default: data/dataset].
    #[arg(long, value_name = "DIR")]
    dataset_dir: Option<PathBuf>,
    /// Test subsets: full, ds1, ds2, ds2v, ds2s [default: ds2v,ds2s,ds2,full].
    #[arg(long, value_delimiter = ',')]
    subset: Vec<String>,
    /// Positive classes [default: V,S].
    #[arg(long, value_delimiter = ',')]
    positive: Vec<String>,
    /// negative or not_false_positive [default: negative].
    #[arg(long)]
    fusion_policy: Option<String>,
    /// full or none [default: full].
    #[arg(long)]
    confusion: Option<String>,
}

#[derive(Args, Debug)]
pub struct AnalyzeArgs {
    /// Checkpoint directory, or a training directory with selected.json [default: runs/train].
    #[arg(long, value_name = "DIR")]
    checkpoint: Option<PathBuf>,
    /// Prepared dataset directory [default: data/dataset].
    #[arg(long, value_name = "DIR")]
    dataset_dir: Option<PathBuf>,
    /// Test beats drawn per class [default: 500].
    #[arg(long)]
    per_class: Option<usize>,
    /// Independent draws, each with its own seed [default: 1].
    #[arg(long)]
    repeats: Option<usize>,
    /// Seed of the first draw [default: 0].
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug)]
pub struct SegmentArgs {
    /// Base checkpoint directory, or a training directory with selected.json [default: runs/train].
    #[arg(long, value_name = "DIR")]
    checkpoint: Option<PathBuf>,
    /// Prepared dataset directory [default: data/dataset].
    #[arg(long, value_name = "DIR")]
    dataset_dir: Option<PathBuf>,
    /// Last block kept [default: 2].
    #[arg(long)]
    cut: Option<usize>,
    /// Class pair [default: V,F].
    #[arg(long, value_delimiter = ',')]
    classes: Vec<String>,
    /// random or identity [default: random].
    #[arg(long)]
    head_init: Option<String>,
    /// Fine-tuning epochs [default: 30].
    #[arg(long)]
    max_epochs: Option<usize>,
    /// Seed for the head and the holdout [default: 0].
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug)]
pub struct GradcheckArgs {
    /// Random shapes per op.
    #[arg(long, default_value_t = 20)]
    cases: usize,
    /// Seed of the shape generator.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Largest accepted relative error.
    #[arg(long, default_value_t = 1e-3)]
    tolerance: f64,
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let mut cfg = config::RunConfig::load(cli.config.as_deref())?;
    if let Some(d) = cli.cache_dir {
        cfg.paths.cache_dir = d;
    }
    if let Some(d) = cli.report_dir {
        cfg.paths.report_dir = d;
    }
    match cli.command {
        Command::Fetch(a) => commands::fetch(cfg, a),
        Command::Prepare(a) => commands::prepare(cfg, a),
        Command::Train(a) => commands::train(cfg, a),
        Command::Eval(a) => commands::eval(cfg, a),
        Command::Analyze(a) => commands::analyze(cfg, a),
        Command::Segment(a) => commands::segment(cfg, a),
        Command::Gradcheck(a) => commands::gradcheck(a),
    }
}

fn main() {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => std::process::exit(exit::OK),
        Err(e) => {
            eprintln!("error: {e:#}");
            std::process::exit(exit::code(&e));
        }
    }
}
