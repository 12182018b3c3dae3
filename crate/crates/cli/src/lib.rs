//! Experiment runner: data ingestion, training, evaluation and the
//! comparison, ablation, transfer and attention-cost experiments.

pub mod commands;
pub mod config;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use informer::eval::{Scale, TransferStats};
use informer::model::ModelVariant;
use informer::{Error, ErrorClass};

pub use config::RunConfig;

#[derive(Debug, Parser)]
#[command(name = "informer", version, about = "Long-sequence forecasting experiments on minute bars")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate manifest datasets and print their split sizes.
    Ingest(Flags),
    /// Train one variant on one dataset; writes a checkpoint and history.
    Train(Flags),
    /// Score a checkpoint on the test split of one or more datasets.
    Evaluate(Flags),
    /// Train and score several variants per dataset, with display samples.
    Compare(Flags),
    /// Informer against Informer† over several seeds.
    Ablate(Flags),
    /// Apply a checkpoint to other datasets without fine-tuning.
    Transfer(Flags),
    /// Count attention dot products at several sequence lengths.
    BenchAttention(Flags),
    /// Write a synthetic spike series and a manifest for it.
    Synth(Flags),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Ingest(_) => "ingest",
            Command::Train(_) => "train",
            Command::Evaluate(_) => "evaluate",
            Command::Compare(_) => "compare",
            Command::Ablate(_) => "ablate",
            Command::Transfer(_) => "transfer",
            Command::BenchAttention(_) => "bench-attention",
            Command::Synth(_) => "synth",
        }
    }

    pub fn flags(&self) -> &Flags {
        match self {
            Command::Ingest(f)
            | Command::Train(f)
            | Command::Evaluate(f)
            | Command::Compare(f)
            | Command::Ablate(f)
            | Command::Transfer(f)
            | Command::BenchAttention(f)
            | Command::Synth(f) => f,
        }
    }
}

/// Flags shared by every subcommand; each overrides the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// TOML run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Dataset manifest.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Dataset key (`SYMBOL-interval` or symbol); repeatable.
    #[arg(long)]
    pub dataset: Vec<String>,
    /// Model variant; repeatable.
    #[arg(long)]
    pub variant: Vec<ModelVariant>,
    /// Report only one scale.
    #[arg(long)]
    pub scale: Option<Scale>,
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Normalization statistics for transfer.
    #[arg(long)]
    pub stats: Option<TransferStats>,
    /// Sequence lengths for the attention benchmark.
    #[arg(long, value_delimiter = ',')]
    pub lengths: Option<Vec<usize>>,
}

/// Process exit status for a failure.
pub fn exit_code(err: &Error) -> i32 {
    match err.class() {
        ErrorClass::Io => 1,
        ErrorClass::Config => 2,
        ErrorClass::Data => 3,
        ErrorClass::Numeric => 4,
    }
}

/// Loads the configuration, applies the flags and runs the command.
pub fn run(command: &Command) -> informer::Result<()> {
    let flags = command.flags();
    let base = match &flags.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let cfg = base.resolve(command.name(), flags)?;
    commands::dispatch(command.name(), &cfg)
}
