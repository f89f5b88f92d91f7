//! `symflow`: datasets, training, sampling, evaluation and (λ, χ) sweeps.

mod commands;
mod config;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use symflow_core::flow::Distortion;

#[derive(Parser, Debug)]
#[command(name = "symflow", version, about = "Discrete flow-matching graph generation with tunable symmetry breaking")]
struct Cli {
    /// Seed for every random stream; overrides seeds in config files.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a dataset into train/val/test JSONL files.
    Dataset(DatasetArgs),
    /// Train a denoiser and log metrics.
    Train(TrainArgs),
    /// Sample graphs from a checkpoint.
    Sample(SampleArgs),
    /// Score generated graphs against train/test sets.
    Eval(EvalArgs),
    /// Train every (λ, χ) cell of a grid and tabulate min UN.
    Sweep(SweepArgs),
}

#[derive(Args, Debug)]
struct DatasetArgs {
    /// JSON dataset spec.
    #[arg(long, conflicts_with = "preset")]
    spec: Option<PathBuf>,
    /// Built-in spec: sbm-desk, sbm, planar, tree, er, ba.
    #[arg(long)]
    preset: Option<String>,
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// Training config, or the manifest of an earlier run.
    #[arg(long)]
    config: PathBuf,
    /// Dataset directory written by `dataset`.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    epochs: Option<usize>,
    /// Continue from the latest checkpoint in the output directory.
    #[arg(long)]
    resume: bool,
}

#[derive(Args, Debug)]
struct SampleArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long, default_value_t = 32)]
    count: usize,
    /// Dataset directory supplying node counts and marginal noise.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Fixed node count for every sample.
    #[arg(long)]
    nodes: Option<usize>,
    /// Sample from the uniform prior instead of the training marginals.
    #[arg(long)]
    uniform_noise: bool,
    #[arg(long, default_value_t = 0.0)]
    omega: f64,
    #[arg(long, default_value_t = 0.0)]
    eta: f64,
    /// identity, poly:k or cosine.
    #[arg(long, default_value = "identity")]
    distortion: Distortion,
    #[arg(long, default_value_t = 100)]
    steps: usize,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    generated: PathBuf,
    /// Dataset directory supplying train/test graphs and the family.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    train: Option<PathBuf>,
    #[arg(long)]
    test: Option<PathBuf>,
    /// Dataset spec naming the family (when --data is not given).
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Count only graphs with no isomorphic duplicate as unique.
    #[arg(long)]
    strict_uniqueness: bool,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[arg(long)]
    grid: PathBuf,
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build_global()?;
    }
    std::fs::create_dir_all(&cli.out)?;
    match cli.command {
        Command::Dataset(a) => commands::dataset(&cli.out, cli.seed, a.spec.as_deref(), a.preset.as_deref()),
        Command::Train(a) => commands::train(&cli.out, cli.seed, &a.config, a.data.as_deref(), a.epochs, a.resume),
        Command::Sample(a) => commands::sample(&cli.out, cli.seed, &a),
        Command::Eval(a) => commands::eval(&cli.out, &a),
        Command::Sweep(a) => commands::sweep(&cli.out, cli.seed, &a.grid),
    }
}
