//! `semprox`: build gold data, annotate it with a language model and score
//! the result against the human labels.
//!
//! Exit codes: 0 success, 1 runtime or provider failure, 2 invalid input.

mod commands;
mod config;
mod failure;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use semprox_core::corpus::SplitSizes;

use config::Overrides;

#[derive(Debug, Parser)]
#[command(name = "semprox", version, about = "Semantic proximity annotation with language models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Filter raw judgments down to unanimous gold instances.
    Ingest {
        /// Instances TSV (instance_id, lemma, sentence1, sentence2, offsets).
        #[arg(long)]
        instances: PathBuf,
        /// Judgments TSV (instance_id, annotator, label).
        #[arg(long)]
        judgments: PathBuf,
        /// Gold TSV to write.
        #[arg(long)]
        out: PathBuf,
    },
    /// Shuffle a gold file with a fixed seed and cut it into dev/train/test.
    Split {
        /// Gold TSV produced by `ingest`.
        #[arg(long)]
        gold: PathBuf,
        /// Number of dev instances.
        #[arg(long)]
        dev: usize,
        /// Number of train instances.
        #[arg(long)]
        train: usize,
        /// Number of test instances.
        #[arg(long)]
        test: usize,
        /// Shuffle seed.
        #[arg(long)]
        seed: u64,
        /// Directory that receives dev.tsv, train.tsv and test.tsv.
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Annotate a split and write per-trial reports plus a summary.
    Annotate {
        /// Run configuration (JSON).
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
        /// Also save the first trial's raw responses as a replay fixture.
        #[arg(long)]
        record_fixture: Option<PathBuf>,
        /// Replace an existing run directory.
        #[arg(long)]
        force: bool,
    },
    /// Evaluate every temperature/top_p cell and pick the best.
    Sweep {
        /// Run configuration (JSON).
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
        /// Comma-separated temperatures (default 0.1..1.0 in steps of 0.1).
        #[arg(long, value_delimiter = ',')]
        temperatures: Vec<f64>,
        /// Comma-separated top_p values (default 0.1..1.0 in steps of 0.1).
        #[arg(long, value_delimiter = ',')]
        top_ps: Vec<f64>,
        /// Replace an existing run directory.
        #[arg(long)]
        force: bool,
    },
    /// Write a chat-format JSONL fine-tuning file from a gold split.
    FinetunePrep {
        /// Gold TSV of training instances.
        #[arg(long)]
        train: PathBuf,
        /// JSONL file to write.
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the trial table and label distributions of a run directory.
    Report {
        /// Directory written by `annotate` or `sweep`.
        #[arg(long)]
        run_dir: PathBuf,
        /// Print machine-readable JSON instead of tables.
        #[arg(long)]
        json: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Ingest { instances, judgments, out } => commands::ingest(instances, judgments, out),
        Command::Split { gold, dev, train, test, seed, out_dir } => {
            commands::split_gold(gold, SplitSizes { dev: *dev, train: *train, test: *test }, *seed, out_dir)
        }
        Command::Annotate { config, overrides, record_fixture, force } => {
            commands::annotate(config, overrides, record_fixture.as_deref(), *force)
        }
        Command::Sweep { config, overrides, temperatures, top_ps, force } => {
            commands::sweep(config, overrides, temperatures, top_ps, *force)
        }
        Command::FinetunePrep { train, out } => commands::finetune_prep(train, out),
        Command::Report { run_dir, json } => commands::report(run_dir, *json),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {failure}");
            failure.exit_code()
        }
    }
}
