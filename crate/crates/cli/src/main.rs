//! `ugrasp`: dataset generation, training, planning and the comparison
//! experiment from the command line.
//!
//! Exit codes: 0 success, 1 usage error, 2 runtime failure.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ugrasp::simlab::Split;

#[derive(Debug, Parser)]
#[command(name = "ugrasp", version, about = "Grasp planning over Monte-Carlo dropout shape completions")]
pub struct Cli {
    /// Worker threads (default: all cores). Outputs do not depend on it.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// TOML run configuration; built-in defaults when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Master seed; the only source of randomness.
    #[arg(long)]
    pub seed: u64,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate synthetic objects and partial views.
    GenData {
        #[command(flatten)]
        common: Common,
        /// Output directory (created if missing).
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the completion network on a generated dataset.
    Train {
        #[command(flatten)]
        common: Common,
        /// Dataset directory written by gen-data.
        #[arg(long)]
        data: PathBuf,
        /// Checkpoint to write.
        #[arg(long)]
        out: PathBuf,
        /// Continue from this checkpoint instead of a fresh initialization.
        #[arg(long)]
        resume: Option<PathBuf>,
        /// Per-epoch loss log (default: <out>.loss.csv).
        #[arg(long)]
        loss_log: Option<PathBuf>,
    },
    /// Plan grasps on one point cloud.
    Plan {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Observed points, one `x y z` per line.
        #[arg(long)]
        cloud: PathBuf,
        /// Run artifact to write (JSON).
        #[arg(long)]
        out: PathBuf,
        /// Shape samples; overrides the config.
        #[arg(long)]
        samples: Option<usize>,
        /// Disable test-time dropout.
        #[arg(long)]
        no_dropout: bool,
        /// Grasps to print; overrides the config.
        #[arg(long)]
        top: Option<usize>,
    },
    /// Run the ODS versus OD comparison on a dataset.
    Experiment {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Output directory for report.json, report.txt and scores.csv.
        #[arg(long)]
        out: PathBuf,
        /// Comma-separated splits; overrides the config.
        #[arg(long, value_delimiter = ',', value_parser = parse_split)]
        splits: Option<Vec<Split>>,
    },
    /// Render a saved experiment report.
    Report {
        /// report.json written by `experiment`.
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = ReportFormat::Table)]
        format: ReportFormat,
        /// Write here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the default configuration as TOML.
    Config,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReportFormat {
    Table,
    Csv,
    Json,
}

fn parse_split(s: &str) -> Result<Split, String> {
    Split::parse(s).ok_or_else(|| format!("unknown split {s:?} (training, holdout-views, holdout-models)"))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if cli.jobs == Some(0) {
        eprintln!("error: --jobs must be >= 1");
        return ExitCode::from(1);
    }
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            ExitCode::from(2)
        }
    }
}

/// The error chain on one line, skipping causes already quoted by their
/// parent's message.
fn describe(e: &anyhow::Error) -> String {
    let mut msg = e.to_string();
    for cause in e.chain().skip(1) {
        let c = cause.to_string();
        if !msg.ends_with(&c) {
            msg = format!("{msg}: {c}");
        }
    }
    msg
}
