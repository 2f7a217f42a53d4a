use absakit::checkpoint::{available_checkpoints, Location, Source, TaskCode};
use clap::Args;
use serde_json::json;

use crate::error::CliError;
use crate::output::{table, Output};
use crate::{CliResult, Global};

#[derive(Args, Debug)]
pub struct CheckpointsArgs {
    /// asc, ate or atesc; all three when omitted
    #[arg(long)]
    task: Option<TaskCode>,
}

pub fn run(g: &Global, args: CheckpointsArgs) -> CliResult {
    let mut sources = vec![Source::Store(g.store())];
    if let Some(hub) = &g.hub {
        sources.push(Source::Hub(hub.clone()));
    }
    let codes = match args.task {
        Some(c) => vec![c],
        None => vec![TaskCode::Asc, TaskCode::Ate, TaskCode::Atesc],
    };
    let mut rows = Vec::new();
    for code in codes {
        let (entries, warnings) = available_checkpoints(code, &sources);
        for w in warnings {
            eprintln!("warning: {w}");
        }
        rows.extend(entries.into_values());
    }
    if rows.is_empty() {
        eprintln!("no checkpoints");
        return Ok(());
    }
    let mut out = Output::new(g.json);
    let location = |l: &Location| match l {
        Location::Local(p) => p.display().to_string(),
        Location::Remote(u) => u.clone(),
    };
    if out.is_human() {
        let body: Vec<Vec<String>> = rows
            .iter()
            .map(|e| {
                let m = &e.meta.metrics;
                vec![
                    e.meta.name.clone(),
                    e.meta.task_code.to_string(),
                    e.meta.model_id.clone(),
                    format!("{:.2}", 100.0 * m.acc_asc),
                    format!("{:.2}", 100.0 * m.f1_asc),
                    if e.is_remote() { "remote" } else { "local" }.to_string(),
                ]
            })
            .collect();
        let text = table(&["name", "task", "model", "acc", "f1", "where"], &body);
        return out.emit(&json!(null), || text).map_err(|e| CliError::io("<stdout>", e));
    }
    for e in rows {
        let record = json!({
            "name": e.meta.name,
            "task": e.meta.task_code,
            "model": e.meta.model_id,
            "metrics": e.meta.metrics,
            "remote": e.is_remote(),
            "location": location(&e.location),
        });
        out.emit(&record, String::new).map_err(|e| CliError::io("<stdout>", e))?;
    }
    Ok(())
}
