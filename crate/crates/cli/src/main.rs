mod commands;
mod config;

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage error: {0}")]
    Usage(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("{0}")]
    Runtime(String),
    #[error("{context}: {source}")]
    Io {
        context: String,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Config(_) => 2,
            CliError::Runtime(_) | CliError::Io { .. } => 1,
        }
    }

    pub fn io(context: impl std::fmt::Display) -> impl FnOnce(std::io::Error) -> CliError {
        let context = context.to_string();
        move |source| CliError::Io { context, source }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "cdsac",
    version,
    about = "Distributional soft actor-critic with an energy-distance critic"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train an agent and write its log, checkpoints and summary.
    Train(TrainArgs),
    /// Evaluate a checkpoint with the deterministic policy.
    Eval(EvalArgs),
    /// Run the tabular operator and iteration probes.
    Verify(VerifyArgs),
    /// Sweep the critic's mean-gradient weight over σ and write a CSV.
    AnalyzeGradients(AnalyzeArgs),
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// JSON run configuration; defaults are used for missing keys.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub steps: Option<u64>,
    #[arg(long, value_parser = ["cdsac", "sac"])]
    pub algo: Option<String>,
    #[arg(long, value_parser = ["pendulum", "pointmass", "noisy_chain"])]
    pub env: Option<String>,
    /// Config overrides as `dotted.key=value`, applied after the flags.
    #[arg(value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    pub checkpoint: PathBuf,
    #[arg(long, default_value_t = 100)]
    pub episodes: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Result file; defaults to `eval.json` next to the checkpoint.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Random instances per probe.
    #[arg(long, default_value_t = 20)]
    pub instances: usize,
    /// Also write the JSON report here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub q_current: f64,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub q_target: f64,
    #[arg(long, default_value_t = 1.0)]
    pub sigma_target: f64,
    /// Mean of the noisy target used for the gradient-weight error column.
    #[arg(long, default_value_t = 2.0, allow_negative_numbers = true)]
    pub q_noisy: f64,
    #[arg(long, default_value_t = 0.01)]
    pub sigma_min: f64,
    #[arg(long, default_value_t = 1000.0)]
    pub sigma_max: f64,
    #[arg(long, default_value_t = 200)]
    pub points: usize,
    #[arg(long)]
    pub out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(a) => commands::train(&a),
        Command::Eval(a) => commands::eval(&a),
        Command::Verify(a) => commands::verify(&a),
        Command::AnalyzeGradients(a) => commands::analyze_gradients(&a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
