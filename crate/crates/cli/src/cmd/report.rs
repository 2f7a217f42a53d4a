use std::path::PathBuf;

use absakit::metrics::{render, RenderOptions, ReportKind};
use absakit::metrics::import_table;
use clap::Args;
use serde_json::json;

use crate::error::CliError;
use crate::output::Output;
use crate::{CliResult, Global};

#[derive(Args, Debug)]
pub struct ReportArgs {
    /// Metric tables written by `train` (metrics.csv)
    #[arg(required = true)]
    input: Vec<PathBuf>,

    /// Output directory
    #[arg(long, short, default_value = "absakit-report")]
    out: PathBuf,

    /// Plot kinds: box, violin, scatter, trajectory, sk, a12
    #[arg(long, value_delimiter = ',', default_value = "box,violin,scatter,trajectory,sk,a12")]
    kinds: Vec<ReportKind>,

    /// Significance level for Scott-Knott clustering
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,

    /// Draw groups without horizontal offsets
    #[arg(long)]
    overlap: bool,
}

pub fn run(g: &Global, args: ReportArgs) -> CliResult {
    if !(args.alpha > 0.0 && args.alpha < 1.0) {
        return Err(CliError::Usage(format!("--alpha must be in (0, 1), got {}", args.alpha)));
    }
    let mut series = Vec::new();
    for path in &args.input {
        series.extend(import_table(path)?);
    }
    let opts = RenderOptions { alpha: args.alpha, no_overlap: !args.overlap };
    let written = render(&series, &args.out, &args.kinds, &opts)?;
    let mut out = Output::new(g.json);
    for path in written {
        out.emit(&json!({ "written": path.display().to_string() }), || path.display().to_string())
            .map_err(|e| CliError::io("<stdout>", e))?;
    }
    Ok(())
}
