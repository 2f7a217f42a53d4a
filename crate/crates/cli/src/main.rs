//! `absakit`: train, run and inspect ABSA models from the command line.
//!
//! Exit codes: 0 on success, 1 when an operation fails, 2 on usage errors.

mod cmd;
mod error;
mod output;
mod registry;

use std::path::PathBuf;
use std::process::ExitCode;

use absakit::{cache_root, CACHE_ENV, HUB_ENV};
use clap::{Args, Parser, Subcommand};

use crate::error::CliError;

#[derive(Parser, Debug)]
#[command(name = "absakit", version, about = "Aspect-based sentiment analysis toolkit")]
struct Cli {
    #[command(flatten)]
    global: Global,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Global {
    /// Cache root holding datasets, checkpoints and annotation journals
    #[arg(long, global = true, env = CACHE_ENV)]
    pub cache: Option<PathBuf>,

    /// Checkpoint hub manifest URL or path
    #[arg(long, global = true, env = HUB_ENV)]
    pub hub: Option<String>,

    /// Always print JSON lines, even on a terminal
    #[arg(long, global = true)]
    pub json: bool,
}

impl Global {
    pub fn cache_root(&self) -> PathBuf {
        self.cache.clone().unwrap_or_else(cache_root)
    }

    pub fn store(&self) -> PathBuf {
        self.cache_root().join("checkpoints")
    }

    pub fn data_root(&self) -> PathBuf {
        self.cache_root().join("datasets")
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train every model x dataset x seed combination
    Train(cmd::train::TrainArgs),
    /// Run a checkpoint over sentences
    Infer(cmd::infer::InferArgs),
    /// Convert a corpus between encodings
    Convert(cmd::corpus::ConvertArgs),
    /// Check corpus files or a dataset and report counts
    Validate(cmd::corpus::ValidateArgs),
    /// Write aspect-preserving augmentations of a training split
    Augment(cmd::augment::AugmentArgs),
    /// Render summary tables and plots from exported metrics
    Report(cmd::report::ReportArgs),
    /// Run the annotation service
    Annotate(cmd::annotate::AnnotateArgs),
    /// List available checkpoints
    Checkpoints(cmd::checkpoints::CheckpointsArgs),
    /// List or fetch datasets
    #[command(subcommand)]
    Datasets(cmd::datasets::DatasetsCommand),
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let g = &cli.global;
    let result = match cli.command {
        Command::Train(a) => cmd::train::run(g, a),
        Command::Infer(a) => cmd::infer::run(g, a),
        Command::Convert(a) => cmd::corpus::convert(g, a),
        Command::Validate(a) => cmd::corpus::validate(g, a),
        Command::Augment(a) => cmd::augment::run(g, a),
        Command::Report(a) => cmd::report::run(g, a),
        Command::Annotate(a) => cmd::annotate::run(g, a),
        Command::Checkpoints(a) => cmd::checkpoints::run(g, a),
        Command::Datasets(c) => cmd::datasets::run(g, c),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

pub(crate) fn parse_task(s: &str) -> Result<absakit::TaskKind, String> {
    if s.eq_ignore_ascii_case("ate") {
        return Ok(absakit::TaskKind::Atesc);
    }
    s.parse::<absakit::TaskKind>().map_err(|e| e.to_string())
}

pub(crate) type CliResult = Result<(), CliError>;
