mod commands;
mod config;

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;

/// Streaming partial dependence explanations for online models.
#[derive(Debug, Parser)]
#[command(name = "pdstream", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the prequential loop and write explanation frames as JSON lines
    Explain(CommonArgs),
    /// Run the prequential loop and write drift events as JSON lines
    Detect(CommonArgs),
    /// Compute a batch PD curve for a model trained one pass over a CSV
    BatchPdp(CommonArgs),
    /// Write a generator stream to CSV
    Generate(CommonArgs),
}

/// Shared flags; every flag overrides the corresponding config field.
#[derive(Debug, Args)]
struct CommonArgs {
    /// JSON run configuration
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Override the configured seed
    #[arg(long)]
    seed: Option<u64>,
    /// Override the configured output path
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Override the frame emit cadence (serialize every Nth frame)
    #[arg(long, value_name = "N")]
    cadence: Option<u64>,
    /// Override the smoothing parameter
    #[arg(long, value_name = "F")]
    alpha: Option<f64>,
    /// Override the number of grid points
    #[arg(long, value_name = "N")]
    grid_size: Option<usize>,
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Explain(args) => commands::run_explain(&args),
        Command::Detect(args) => commands::run_detect(&args),
        Command::BatchPdp(args) => commands::run_batch_pdp(&args),
        Command::Generate(args) => commands::run_generate(&args),
    };
    if let Err(err) = result {
        eprintln!("error: {err}");
        let mut source = std::error::Error::source(&err);
        while let Some(cause) = source {
            eprintln!("  caused by: {cause}");
            source = cause.source();
        }
        std::process::exit(err.exit_code());
    }
}
