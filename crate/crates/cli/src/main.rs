use std::path::PathBuf;

use anyhow::Result;
use clap::{Parser, Subcommand};

use reclink_cli::app;

#[derive(Parser)]
#[command(name = "link", version, about = "Bayesian bipartite record linkage")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Generate a synthetic pair of files with truth labels.
    Synth {
        #[arg(long)]
        config: PathBuf,
    },
    /// Score a matches file against truth labels.
    Eval {
        #[arg(long)]
        estimate: PathBuf,
        #[arg(long)]
        truth: PathBuf,
    },
    /// Precompute u-correction margins to a reusable file.
    Margins {
        #[arg(long)]
        config: PathBuf,
    },
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Cli::parse().command {
        Command::Run { config } => app::cmd_run(&config),
        Command::Synth { config } => app::cmd_synth(&config),
        Command::Eval { estimate, truth } => app::cmd_eval(&estimate, &truth),
        Command::Margins { config } => app::cmd_margins(&config).map(|_| ()),
    }
}
