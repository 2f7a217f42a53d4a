use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use absakit::corpus::{self, validate_bytes, ValidationReport};
use absakit::{EncodingKind, TaskKind};
use clap::Args;
use serde_json::json;

use super::{read_text, write_text};
use crate::error::CliError;
use crate::output::{table, Output};
use crate::{parse_task, registry, CliResult, Global};

#[derive(Args, Debug)]
pub struct ConvertArgs {
    /// Input document
    input: PathBuf,

    /// Encoding of the input: asc, atesc or spantag
    #[arg(long)]
    from: EncodingKind,

    /// Encoding to write: asc, atesc or spantag
    #[arg(long)]
    to: EncodingKind,

    /// Output file; stdout when omitted
    #[arg(long, short)]
    output: Option<PathBuf>,
}

pub fn convert(_g: &Global, args: ConvertArgs) -> CliResult {
    let text = read_text(&args.input)?;
    let out = corpus::convert(&text, args.from, args.to)
        .map_err(|e| CliError::Parse { path: args.input.clone(), source: e })?;
    match &args.output {
        Some(path) => write_text(path, &out),
        None => {
            print!("{out}");
            Ok(())
        }
    }
}

#[derive(Args, Debug)]
pub struct ValidateArgs {
    /// Corpus files to check
    #[arg(conflicts_with = "dataset", required_unless_present = "dataset")]
    files: Vec<PathBuf>,

    /// Encoding of the files
    #[arg(long, default_value = "atesc")]
    kind: EncodingKind,

    /// Check every split of a dataset directory, name or id instead
    #[arg(long)]
    dataset: Option<String>,

    /// Task of a dataset directory
    #[arg(long, default_value = "asc", value_parser = parse_task)]
    task: TaskKind,

    /// Count augmentation files into the training split
    #[arg(long)]
    with_aug: bool,
}

fn report_files(files: &[PathBuf], kind: EncodingKind) -> Result<ValidationReport, CliError> {
    let mut total = ValidationReport::default();
    for path in files {
        let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
        let report = validate_bytes(&bytes, kind);
        for d in &report.diagnostics {
            let at = d.line.map(|l| format!(":{l}")).unwrap_or_default();
            eprintln!("{}{at}: {:?}: {}", path.display(), d.code, d.message);
        }
        total.merge(report);
    }
    Ok(total)
}

fn file_record(path: &Path, r: &ValidationReport) -> serde_json::Value {
    json!({
        "file": path.display().to_string(),
        "examples": r.examples,
        "spans": r.spans,
        "polarity": r.polarity,
        "diagnostics": r.diagnostics,
    })
}

pub fn validate(g: &Global, args: ValidateArgs) -> CliResult {
    let mut out = Output::new(g.json);
    let io = |e| CliError::io("<stdout>", e);
    let mut problems = 0;
    match &args.dataset {
        None => {
            for path in &args.files {
                let r = report_files(std::slice::from_ref(path), args.kind)?;
                problems += r.diagnostics.len();
                out.emit(&file_record(path, &r), || {
                    format!("{}: {} examples, {} spans, {} problems", path.display(), r.examples, r.spans, r.diagnostics.len())
                })
                .map_err(io)?;
            }
        }
        Some(key) => {
            let handle = registry::resolve(key, args.task, &g.data_root())?;
            let kind = handle.encoding();
            let mut splits = BTreeMap::new();
            for (name, files) in [
                ("train", &handle.splits.train),
                ("valid", &handle.splits.valid),
                ("test", &handle.splits.test),
                ("augmented", &handle.aug_files),
            ] {
                let r = report_files(files, kind)?;
                problems += r.diagnostics.len();
                splits.insert(name, r);
            }
            let count = |s: &str| splits[s].examples;
            let train = count("train") + if args.with_aug { count("augmented") } else { 0 };
            let expected = handle.expected.map(|e| {
                json!({
                    "train": e.train + if args.with_aug { e.augmented } else { 0 },
                    "valid": e.valid,
                    "test": e.test,
                    "augmented": e.augmented,
                })
            });
            let record = json!({
                "dataset": handle.name,
                "task": handle.task,
                "with_aug": args.with_aug,
                "train": train,
                "valid": count("valid"),
                "test": count("test"),
                "augmented": count("augmented"),
                "spans": splits.values().map(|r| r.spans).sum::<usize>(),
                "problems": problems,
                "expected": expected,
            });
            out.emit(&record, || {
                let rows: Vec<Vec<String>> = [("train", train), ("valid", count("valid")), ("test", count("test"))]
                    .iter()
                    .map(|(name, n)| {
                        let exp = expected.as_ref().map(|e| e[*name].to_string()).unwrap_or_else(|| "-".into());
                        vec![name.to_string(), n.to_string(), exp]
                    })
                    .collect();
                format!("{} ({})\n{}\n{problems} problems", handle.name, handle.task, table(&["split", "examples", "expected"], &rows))
            })
            .map_err(io)?;
        }
    }
    if problems > 0 {
        return Err(CliError::Failed(format!("{problems} problems found")));
    }
    Ok(())
}
