use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod settings;

#[derive(Parser, Debug)]
#[command(name = "etrig", version, about = "Character-level event trigger tagging")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, Default)]
pub struct Common {
    /// key=value config file; command-line flags override it
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic labeled + unlabeled corpus
    Synth(SynthArgs),
    /// Pretrain character embeddings with skip-gram negative sampling
    Pretrain(PretrainArgs),
    /// Train a DNN or maxent tagger
    Train(TrainArgs),
    /// Tag raw text with a trained model
    Tag(TagArgs),
    /// Score predicted spans against gold
    Eval(EvalArgs),
    /// Train one DNN per embedding dimension and report dev scores
    Sweep(SweepArgs),
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub train: Option<usize>,
    #[arg(long)]
    pub dev: Option<usize>,
    #[arg(long)]
    pub test: Option<usize>,
    /// Number of unlabeled sentences
    #[arg(long)]
    pub unlabeled: Option<usize>,
}

#[derive(Args, Debug)]
pub struct PretrainArgs {
    /// Unlabeled text, one sentence per line
    pub input: PathBuf,
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub window: Option<usize>,
    #[arg(long)]
    pub negatives: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub min_count: Option<u64>,
    #[arg(long)]
    pub subsample: Option<f64>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct ModelFlags {
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub radius: Option<usize>,
    /// Hidden layer sizes, comma separated
    #[arg(long)]
    pub hidden: Option<String>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub l2: Option<f64>,
    /// Epochs without dev improvement before stopping; 0 disables
    #[arg(long)]
    pub patience: Option<usize>,
    /// Additive smoothing for the transition estimate
    #[arg(long)]
    pub alpha: Option<f64>,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub dev: PathBuf,
    /// Pretrained embeddings (archive or text); random init when absent
    #[arg(long)]
    pub init_embeddings: Option<PathBuf>,
    /// dnn or maxent
    #[arg(long)]
    pub kind: Option<String>,
    /// Epoch log path, default <out>.log.tsv
    #[arg(long)]
    pub log: Option<PathBuf>,
    /// Write the returned model's dev predictions here
    #[arg(long)]
    pub dev_predictions: Option<PathBuf>,
    /// Use this transition table (archive or 4x3 text) instead of estimating one
    #[arg(long)]
    pub transitions: Option<PathBuf>,
    #[command(flatten)]
    pub model: ModelFlags,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug)]
pub struct TagArgs {
    /// Text to tag, one sentence per line
    pub input: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
    /// Transition archive or 4x3 text table, default <model>.trans
    #[arg(long)]
    pub transitions: Option<PathBuf>,
    /// Read the input as a labeled corpus and ignore its tags
    #[arg(long)]
    pub labeled_input: bool,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    pub pred: PathBuf,
    pub gold: PathBuf,
    /// Label printed in front of the scores
    #[arg(long, default_value = "model")]
    pub label: String,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub dev: PathBuf,
    /// Pretrain embeddings at each dimension from this corpus
    #[arg(long)]
    pub unlabeled: Option<PathBuf>,
    /// Comma-separated dimensions, default 10,25,50,100,200
    #[arg(long)]
    pub dims: Option<String>,
    #[command(flatten)]
    pub model: ModelFlags,
    #[command(flatten)]
    pub common: Common,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Synth(a) => commands::synth(a),
        Command::Pretrain(a) => commands::pretrain(a),
        Command::Train(a) => commands::train(a),
        Command::Tag(a) => commands::tag(a),
        Command::Eval(a) => commands::eval(a),
        Command::Sweep(a) => commands::sweep(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(commands::exit_code(&err))
        }
    }
}
