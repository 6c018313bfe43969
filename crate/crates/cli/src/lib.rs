//! The `contourfill` command line: corpus building, corruption, training,
//! completion, evaluation and rendering.

pub mod commands;
pub mod data;
pub mod error;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use contourfill_core::DeletionMode;
use contourfill_net::Architecture;

pub use error::{CliError, Result};

/// Environment variable naming the default data directory.
pub const DATA_ENV: &str = "CONTOURFILL_DATA";

#[derive(Debug, Parser)]
#[command(name = "contourfill", version, about = "Indication-free contour completion for vector glyphs")]
pub struct Cli {
    /// Log progress (repeat for debug output).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Extract glyph outlines from a directory of TrueType fonts.
    Ingest(IngestArgs),
    /// Generate a synthetic corpus.
    Synth(SynthArgs),
    /// Delete control points from every glyph of a corpus.
    Corrupt(CorruptArgs),
    /// Train a completion model.
    Train(TrainArgs),
    /// Complete corrupted glyphs with a trained model.
    Complete(CompleteArgs),
    /// Score predictions against ground truth.
    Evaluate(EvaluateArgs),
    /// Draw glyphs as PNG images.
    Render(RenderArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Directory searched recursively for .ttf files.
    #[arg(long)]
    pub fonts: PathBuf,
    #[arg(long, env = DATA_ENV)]
    pub out: PathBuf,
    /// Train, validation and test shares.
    #[arg(long, default_value = "0.8,0.1,0.1")]
    pub split: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = contourfill_core::ingest::DEFAULT_CHARSET)]
    pub charset: String,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Number of glyphs; fonts hold five glyphs each.
    #[arg(long)]
    pub count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, env = DATA_ENV)]
    pub out: PathBuf,
    #[arg(long, default_value = "0.8,0.1,0.1")]
    pub split: String,
}

#[derive(Debug, Args)]
pub struct CorruptArgs {
    /// Corpus directory or a single sequence file.
    #[arg(long = "in", env = DATA_ENV)]
    pub input: PathBuf,
    /// Output directory; defaults to the corpus directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value = "random")]
    pub mode: DeletionMode,
    #[arg(long, default_value = "0.1,0.2,0.3,0.4,0.5")]
    pub rates: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// `key = value` file; its values override the flags below.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Directory holding `train.*` and `validation.*` corrupted pairs.
    #[arg(long, env = DATA_ENV)]
    pub data: PathBuf,
    /// Checkpoint path.
    #[arg(long)]
    pub out: PathBuf,
    /// Metrics log; defaults to `<out>.metrics.jsonl`.
    #[arg(long)]
    pub metrics: Option<PathBuf>,
    #[arg(long)]
    pub architecture: Option<Architecture>,
    #[arg(long)]
    pub d_model: Option<usize>,
    #[arg(long)]
    pub layers: Option<usize>,
    #[arg(long)]
    pub heads: Option<usize>,
    #[arg(long)]
    pub ffn_width: Option<usize>,
    #[arg(long)]
    pub dropout: Option<f64>,
    #[arg(long)]
    pub positional_encoding: Option<bool>,
    #[arg(long)]
    pub max_len: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub patience: Option<usize>,
    #[arg(long)]
    pub max_epochs: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub clip_norm: Option<f64>,
}

#[derive(Debug, Args)]
pub struct CompleteArgs {
    #[arg(long)]
    pub ckpt: PathBuf,
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Run an encoder-only checkpoint with oracle gap positions.
    #[arg(long, requires = "oracle")]
    pub baseline: bool,
    #[arg(long)]
    pub oracle: Option<PathBuf>,
    #[arg(long, default_value_t = 410)]
    pub max_len: usize,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long)]
    pub target: PathBuf,
    #[arg(long = "input")]
    pub input: PathBuf,
    /// Per-glyph CSV; aggregates and curves are written beside it.
    #[arg(long)]
    pub report: PathBuf,
    /// Corruption oracle; defaults to the `.oracle.jsonl` sibling of the input.
    #[arg(long)]
    pub oracle: Option<PathBuf>,
    /// Font styles; defaults to `manifest.csv` beside the target file.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Draw deleted points from this oracle file in gray.
    #[arg(long)]
    pub oracle: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Ingest(a) => commands::ingest(a),
        Command::Synth(a) => commands::synth(a),
        Command::Corrupt(a) => commands::corrupt(a),
        Command::Train(a) => commands::train(a),
        Command::Complete(a) => commands::complete(a),
        Command::Evaluate(a) => commands::evaluate(a),
        Command::Render(a) => commands::render(a),
    }
}
