use std::path::PathBuf;

use absakit::augment::{augment, write_aug_files, AugmentOp, AugmentPolicy, Lexicon, MAX_MULTIPLIER};
use absakit::dataset::{load, DatasetRegistry};
use absakit::TaskKind;
use clap::Args;
use serde_json::json;

use super::read_text;
use crate::error::CliError;
use crate::output::Output;
use crate::{parse_task, registry, CliResult, Global};

#[derive(Args, Debug)]
pub struct AugmentArgs {
    /// Dataset directory, name or id
    #[arg(long)]
    dataset: String,

    /// Task of a dataset directory
    #[arg(long, default_value = "asc", value_parser = parse_task)]
    task: TaskKind,

    /// Augmented copies per training example
    #[arg(long, default_value_t = 1)]
    multiplier: usize,

    /// Edit probability per eligible token, at most 0.5
    #[arg(long, default_value_t = 0.1)]
    rate: f64,

    /// Operations in order
    #[arg(long, value_delimiter = ',', default_value = "synonym_swap,random_deletion,random_swap")]
    ops: Vec<AugmentOp>,

    #[arg(long, default_value_t = 1)]
    seed: u64,

    /// Synonym sets, one tab-separated set per line
    #[arg(long)]
    lexicon: Option<PathBuf>,
}

pub fn run(g: &Global, args: AugmentArgs) -> CliResult {
    if args.multiplier > MAX_MULTIPLIER {
        return Err(CliError::Usage(format!("--multiplier must be at most {MAX_MULTIPLIER}")));
    }
    let lexicon = match &args.lexicon {
        Some(path) => Lexicon::parse(&read_text(path)?)?,
        None => Lexicon::default(),
    };
    let policy = AugmentPolicy { multiplier: args.multiplier, ops: args.ops.clone(), rate: args.rate, seed: args.seed };
    let handle = registry::resolve(&args.dataset, args.task, &g.data_root())?;
    let train = load(&handle, false)?.train;
    let augmented = augment(&train, &policy, &lexicon)?;
    let mut reg = DatasetRegistry::new();
    let id = reg.register(handle.clone())?.id;
    let path = write_aug_files(&mut reg, id, &augmented)?;
    let record = json!({
        "dataset": handle.name,
        "source_examples": train.len(),
        "augmented": augmented.len(),
        "path": path.display().to_string(),
    });
    Output::new(g.json)
        .emit(&record, || format!("{}: wrote {} examples to {}", handle.name, augmented.len(), path.display()))
        .map_err(|e| CliError::io("<stdout>", e))
}
