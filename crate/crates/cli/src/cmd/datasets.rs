use std::path::PathBuf;

use clap::Subcommand;
use serde_json::json;

use crate::error::CliError;
use crate::output::{table, Output};
use crate::{registry, CliResult, Global};

#[derive(Subcommand, Debug)]
pub enum DatasetsCommand {
    /// Local datasets followed by catalog entries without local files
    List,
    /// Download and verify the datasets of a hub manifest
    Fetch {
        /// Manifest URL or path
        manifest: String,
        /// Destination root; defaults to <cache>/datasets
        #[arg(long)]
        dest: Option<PathBuf>,
    },
}

pub fn run(g: &Global, command: DatasetsCommand) -> CliResult {
    let mut out = Output::new(g.json);
    let io = |e| CliError::io("<stdout>", e);
    match command {
        DatasetsCommand::List => {
            let reg = registry::local_registry(&g.data_root())?;
            if out.is_human() {
                let rows: Vec<Vec<String>> = reg
                    .handles()
                    .iter()
                    .map(|h| {
                        vec![
                            h.id.to_string(),
                            h.name.clone(),
                            h.language.clone(),
                            h.task.to_string(),
                            if h.is_trainable() { "local" } else { "-" }.to_string(),
                        ]
                    })
                    .collect();
                let text = table(&["id", "name", "language", "task", "files"], &rows);
                return out.emit(&json!(null), || text).map_err(io);
            }
            for h in reg.handles() {
                let record = json!({
                    "id": h.id,
                    "name": h.name,
                    "language": h.language,
                    "task": h.task,
                    "local": h.is_trainable(),
                    "adversarial": h.adversarial,
                    "expected": h.expected,
                });
                out.emit(&record, String::new).map_err(io)?;
            }
        }
        DatasetsCommand::Fetch { manifest, dest } => {
            let dest = dest.unwrap_or_else(|| g.data_root());
            let mut reg = absakit::DatasetRegistry::new();
            let report = reg.fetch(&manifest, &dest)?;
            let names: Vec<&str> = reg.handles().iter().map(|h| h.name.as_str()).collect();
            let record = json!({
                "registered": names,
                "downloaded": report.downloaded,
                "reused": report.reused,
                "dest": dest.display().to_string(),
            });
            out.emit(&record, || {
                format!(
                    "{} datasets ({}); {} files downloaded, {} already present",
                    names.len(),
                    names.join(", "),
                    report.downloaded,
                    report.reused
                )
            })
            .map_err(io)?;
        }
    }
    Ok(())
}
