use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod config;

use config::{ConfigFlags, RunConfig};

/// Pre-train a SMILES Transformer autoencoder, extract fingerprints and
/// benchmark them for data efficiency.
#[derive(Debug, Parser)]
#[command(name = "stfp", version)]
struct Cli {
    /// Read configuration keys from a `key = value` file
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Only log errors
    #[arg(long, global = true)]
    quiet: bool,
    #[command(flatten)]
    keys: ConfigFlags,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train the autoencoder on a SMILES corpus and write a checkpoint
    Pretrain {
        /// One SMILES per line
        #[arg(long)]
        corpus: PathBuf,
        /// Manifest path; the weights go next to it with a .bin extension
        #[arg(long)]
        out: PathBuf,
    },
    /// Write one fingerprint row per input SMILES
    Embed {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// One SMILES per line
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value = "st")]
        kind: commands::Kind,
        #[arg(long)]
        output: PathBuf,
    },
    /// Data-efficiency benchmark on a labelled CSV
    Bench {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        dataset: PathBuf,
        /// Directory for records.csv, summary.csv and plot.csv
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Evaluate within SMILES-length strata
    Strata {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Principal-component coordinates of each molecule's fingerprint
    Project {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, value_enum, default_value = "st")]
        kind: commands::Kind,
        #[arg(long)]
        output: PathBuf,
    },
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    cfg.apply(&cli.keys);
    rayon::ThreadPoolBuilder::new().num_threads(cfg.jobs.max(1)).build_global().ok();
    match cli.command {
        Command::Pretrain { corpus, out } => commands::pretrain(&cfg, &corpus, &out),
        Command::Embed {
            checkpoint,
            input,
            kind,
            output,
        } => commands::embed(&cfg, checkpoint.as_deref(), &input, kind, &output),
        Command::Bench {
            checkpoint,
            dataset,
            out_dir,
        } => commands::bench(&cfg, checkpoint.as_deref(), &dataset, &out_dir),
        Command::Strata {
            checkpoint,
            dataset,
            output,
        } => commands::strata(&cfg, checkpoint.as_deref(), &dataset, &output),
        Command::Project {
            checkpoint,
            dataset,
            kind,
            output,
        } => commands::project(&cfg, checkpoint.as_deref(), &dataset, kind, &output),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.quiet { log::LevelFilter::Error } else { log::LevelFilter::Info };
    env_logger::Builder::new().filter_level(level).format_timestamp_secs().init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
