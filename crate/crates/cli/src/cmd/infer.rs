use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use absakit::checkpoint::{load_predictor, Lookup};
use absakit::corpus::{parse_spantag, BEGIN_TAG};
use absakit::{AbsaExample, Predictor};
use clap::Args;
use rayon::prelude::*;
use serde_json::json;

use super::read_text;
use crate::error::{CliError, Result};
use crate::{CliResult, Global};

#[derive(Args, Debug)]
pub struct InferArgs {
    /// Checkpoint directory, local name or keyword, or hub name
    #[arg(long)]
    checkpoint: String,

    /// A sentence; repeatable. Aspects may be marked with [B-ASP]..[E-ASP]
    #[arg(long, conflicts_with = "file")]
    text: Vec<String>,

    /// One sentence per line
    #[arg(long, required_unless_present = "text")]
    file: Option<PathBuf>,

    /// Sentences predicted together
    #[arg(long, default_value_t = 32, value_parser = clap::value_parser!(u32).range(1..))]
    batch_size: u32,

    /// Skip lines that do not parse instead of failing
    #[arg(long)]
    ignore_error: bool,

    /// Write predictions here instead of stdout
    #[arg(long, short)]
    output: Option<PathBuf>,
}

fn parse_line(line: &str) -> std::result::Result<AbsaExample, String> {
    if line.contains(BEGIN_TAG) {
        parse_spantag(line).map_err(|e| e.to_string())
    } else {
        AbsaExample::from_text(line).map_err(|e| e.to_string())
    }
}

pub fn run(g: &Global, args: InferArgs) -> CliResult {
    let lookup = Lookup { store: g.store(), hub: g.hub.clone(), task: None };
    let (meta, model) = load_predictor(&args.checkpoint, &lookup)?;
    log::info!("loaded {} ({}, {})", meta.name, meta.task_code, meta.model_id);

    let lines: Vec<String> = match &args.file {
        Some(path) => read_text(path)?.lines().map(str::to_string).collect(),
        None => args.text.clone(),
    };
    let mut inputs: Vec<(usize, AbsaExample)> = Vec::new();
    for (i, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match parse_line(line) {
            Ok(ex) => inputs.push((i + 1, ex)),
            Err(message) if args.ignore_error => log::warn!("skipping input line {}: {message}", i + 1),
            Err(message) => return Err(CliError::Input { line: i + 1, message }),
        }
    }

    let mut sink: Box<dyn Write> = match &args.output {
        Some(path) => Box::new(BufWriter::new(File::create(path).map_err(|e| CliError::io(path, e))?)),
        None => Box::new(io::stdout().lock()),
    };
    let target = args.output.clone().unwrap_or_else(|| "<stdout>".into());
    for batch in inputs.chunks(args.batch_size as usize) {
        let results: Vec<Result<String>> = batch
            .par_iter()
            .map(|(line, ex)| {
                let inference = model.infer(ex).map_err(|e| CliError::Input { line: *line, message: e.to_string() })?;
                let spans: Vec<_> = inference
                    .spans
                    .iter()
                    .map(|s| {
                        json!({
                            "start": s.start,
                            "end": s.end,
                            "aspect": inference.tokens[s.start..=s.end].join(" "),
                            "polarity": s.polarity,
                            "confidence": s.confidence,
                        })
                    })
                    .collect();
                Ok(json!({ "line": line, "tokens": inference.tokens, "spans": spans }).to_string())
            })
            .collect();
        for r in results {
            match r {
                Ok(text) => writeln!(sink, "{text}").map_err(|e| CliError::io(&target, e))?,
                Err(e) if args.ignore_error => log::warn!("skipping: {e}"),
                Err(e) => return Err(e),
            }
        }
    }
    sink.flush().map_err(|e| CliError::io(&target, e))?;
    Ok(())
}
