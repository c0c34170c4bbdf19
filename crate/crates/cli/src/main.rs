//! Batch CLI for identification/authentication experiments: rate-region
//! evaluation and search, the closed-form binary curves, codebook
//! simulation with exact or Monte Carlo analysis, adversary evaluation,
//! and the information-identity self-checks.

mod commands;
mod config;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use commands::{Ctx, OutputFormat};
use config::ExperimentConfig;

#[derive(Parser)]
#[command(
    name = "idauth-lab",
    about = "Rate regions, layered-binning codecs, and exact adversary analysis for key-based identification systems",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Experiment configuration file (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory (default: $IDAUTH_LAB_OUT or the current directory).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Seed override; wins over any seed in the configuration file.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads (0 = automatic).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    /// Output format where both are supported.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate region corners or search the achievable frontier.
    Region,
    /// Closed-form tradeoff curves of the binary erasure-cascade example.
    Binary,
    /// Generate a codebook and analyze it exactly or by Monte Carlo.
    Simulate,
    /// Exact false-acceptance analysis of the optimal adversary.
    Attack,
    /// Run the information-identity self-checks.
    Check,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

fn run(cli: Cli) -> Result<(), commands::CmdError> {
    if cli.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
            .map_err(|e| commands::CmdError::Config(format!("thread pool: {e}")))?;
    }
    let config_path = cli
        .config
        .ok_or_else(|| commands::CmdError::Config("--config <file> is required".into()))?;
    let text = std::fs::read_to_string(&config_path).map_err(|e| {
        commands::CmdError::Config(format!("cannot read {}: {e}", config_path.display()))
    })?;
    let config = ExperimentConfig::from_json(&text)?;
    let out_dir = cli
        .out
        .or_else(|| std::env::var_os("IDAUTH_LAB_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    let default_format = match cli.command {
        Command::Region | Command::Binary => OutputFormat::Csv,
        _ => OutputFormat::Json,
    };
    let ctx = Ctx {
        config,
        out_dir,
        seed_override: cli.seed,
        format: match cli.format {
            Some(Format::Csv) => OutputFormat::Csv,
            Some(Format::Json) => OutputFormat::Json,
            None => default_format,
        },
    };
    match cli.command {
        Command::Region => commands::cmd_region(&ctx),
        Command::Binary => commands::cmd_binary(&ctx),
        Command::Simulate => commands::cmd_simulate(&ctx),
        Command::Attack => commands::cmd_attack(&ctx),
        Command::Check => commands::cmd_check(&ctx),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {}", err.message());
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
