mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use symae::init::InitKind;
use symae::training::{BaselineInit, Optimizer};
use symae::{Activation, ClassTag, Skeleton};

/// Symmetric autoencoder experiments on snapshot matrices.
#[derive(Debug, Parser)]
#[command(name = "symae", version)]
struct Cli {
    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a Gaussian-pulse snapshot set (514 grid nodes per sample).
    GenPga(GenPgaArgs),
    /// Split, normalize, initialize, train and evaluate one model.
    Train(TrainArgs),
    /// Compare the EYS start against the best of many random starts.
    InitStudy(InitStudyArgs),
    /// Evaluate reconstruction-error bounds of a saved model.
    Bounds(BoundsArgs),
}

#[derive(Debug, Args)]
pub struct GenPgaArgs {
    #[arg(long, default_value_t = 400)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Snapshot CSV.
    #[arg(long)]
    pub data: PathBuf,
    /// sae, sbae, soae or ae.
    #[arg(long, default_value = "sae")]
    pub class: ClassTag,
    /// Comma-separated widths, e.g. 514,64,15,3.
    #[arg(long)]
    pub skeleton: Skeleton,
    /// leakyrelu:<alpha>,<beta>, hypact:<theta> or identity.
    #[arg(long)]
    pub act: Activation,
    /// eys, he or orth.
    #[arg(long, default_value = "eys")]
    pub init: InitKind,
    #[arg(long, default_value_t = 1500)]
    pub epochs: usize,
    #[arg(long, default_value_t = 500)]
    pub patience: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    #[arg(long, default_value_t = 8)]
    pub batch: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// adam or sgd.
    #[arg(long, default_value = "adam")]
    pub optimizer: Optimizer,
    /// Write every n-th epoch to the history CSV.
    #[arg(long, default_value_t = 1)]
    pub log_every: usize,
    #[arg(long)]
    pub out_model: Option<PathBuf>,
    #[arg(long)]
    pub out_history: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("configs").required(true).args(["widths", "depth_pattern"]))]
pub struct InitStudyArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub act: Activation,
    /// Sweep skeletons {n0, N1, n2} for n2 = 1..=N1.
    #[arg(long, value_name = "N1")]
    pub widths: Option<usize>,
    /// Skeletons {n0,65,3}, {n0,65,5,3}, ... up to {n0,65,33,17,9,5,3}.
    #[arg(long)]
    pub depth_pattern: bool,
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Class tag the EYS and random networks are evaluated as.
    #[arg(long, default_value = "sae")]
    pub class: ClassTag,
    /// Random scheme for the baseline: orth or he.
    #[arg(long, default_value = "orth")]
    pub baseline: BaselineInit,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BoundsArgs {
    /// Checkpoint JSON written by `train`.
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let result = match cli.command {
        Command::GenPga(args) => commands::gen_pga(&args),
        Command::Train(args) => commands::train(&args),
        Command::InitStudy(args) => commands::init_study(&args),
        Command::Bounds(args) => commands::bounds(&args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
