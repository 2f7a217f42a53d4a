use std::collections::BTreeMap;
use std::path::PathBuf;

use absakit::checkpoint;
use absakit::config::{check, defaults, ConfigDiagnostic};
use absakit::dataset::{load, DatasetHandle};
use absakit::ensemble::ensemble_train;
use absakit::metrics::{render, RenderOptions, ReportKind};
use absakit::metrics::{export_table, MetricRecorder};
use absakit::{RunConfig, TaskKind};
use clap::Args;
use serde_json::json;

use super::{flatten_list, read_text};
use crate::error::{CliError, Result};
use crate::output::Output;
use crate::{parse_task, registry, CliResult, Global};

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// asc or atesc (ate trains an atesc model)
    #[arg(long, default_value = "asc", value_parser = parse_task)]
    task: TaskKind,

    /// Dataset directories, names or ids; repeat or separate with commas
    #[arg(long, required = true)]
    dataset: Vec<String>,

    /// Model ids; defaults to the configured model
    #[arg(long)]
    model: Vec<String>,

    /// Seeds, e.g. 1,2,3; one trial per seed
    #[arg(long, value_delimiter = ',')]
    seeds: Vec<u64>,

    /// Append augmentation files to the training split
    #[arg(long)]
    load_aug: bool,

    /// Config override, key=value; repeatable
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,

    /// Config file (JSON or key=value lines)
    #[arg(long)]
    config: Option<PathBuf>,

    /// Directory for metrics.csv, summary.csv and plots
    #[arg(long, default_value = "absakit-report")]
    report_dir: PathBuf,
}

fn build_config(args: &TrainArgs) -> Result<RunConfig> {
    let mut config = defaults(args.task);
    if let Some(path) = &args.config {
        let (cfg, warnings) = RunConfig::from_file_text(&read_text(path)?, args.task)
            .map_err(|e| CliError::Config(vec![ConfigDiagnostic::from(e)]))?;
        for w in warnings {
            log::warn!("{}: {w}", path.display());
        }
        config = cfg;
    }
    let mut pairs: Vec<(String, String)> = Vec::new();
    if !args.seeds.is_empty() {
        let list: Vec<String> = args.seeds.iter().map(u64::to_string).collect();
        pairs.push(("seeds".into(), list.join(",")));
    }
    if args.load_aug {
        pairs.push(("load_aug".into(), "true".into()));
    }
    for o in &args.overrides {
        let (k, v) = o
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("--set expects KEY=VALUE, got `{o}`")))?;
        pairs.push((k.trim().to_string(), v.trim().to_string()));
    }
    let config = config.with_overrides(pairs.iter().map(|(k, v)| (k.as_str(), v.as_str()))).map_err(CliError::Config)?;
    let mut diagnostics = check(&config);
    for m in flatten_list(&args.model) {
        match config.set("model_id", &m) {
            Err(e) => diagnostics.push(e.into()),
            Ok(c) => diagnostics.extend(check(&c).into_iter().filter(|d| d.field == "model_id")),
        }
    }
    diagnostics.dedup();
    if !diagnostics.is_empty() {
        return Err(CliError::Config(diagnostics));
    }
    Ok(config)
}

/// Trial name usable as a checkpoint name.
fn checkpoint_name(trial: &str) -> String {
    trial.chars().map(|c| if c.is_alphanumeric() || matches!(c, '-' | '_' | '.' | '+') { c } else { '_' }).collect()
}

pub fn run(g: &Global, args: TrainArgs) -> CliResult {
    let config = build_config(&args)?;
    let data_root = g.data_root();
    let mut handles: BTreeMap<String, DatasetHandle> = BTreeMap::new();
    let mut names = Vec::new();
    for key in flatten_list(&args.dataset) {
        let handle = registry::resolve(&key, args.task, &data_root)?;
        names.push(handle.name.clone());
        handles.insert(handle.name.clone(), handle);
    }
    let models = match flatten_list(&args.model) {
        m if m.is_empty() => vec![config.model_id.clone()],
        m => m,
    };
    let recorder = MetricRecorder::new();
    let with_aug = config.load_aug;
    let trials = ensemble_train(
        &config,
        &models,
        &names,
        &config.seeds,
        |name| load(&handles[name], with_aug),
        Some(&recorder),
    );

    let mut out = Output::new(g.json);
    let store = g.store();
    let mut failed = 0;
    for t in &trials {
        match &t.outcome {
            Ok(o) => {
                let saved = match config.checkpoint_save_mode {
                    absakit::config::SaveMode::State => {
                        let cfg = config.set("model_id", &t.model_id).expect("model checked");
                        Some(checkpoint::save(&store, &checkpoint_name(&o.trial_name), &o.model, &cfg, o.best)?)
                    }
                    absakit::config::SaveMode::None => None,
                };
                let record = json!({
                    "trial": o.trial_name,
                    "model": t.model_id,
                    "dataset": t.dataset,
                    "seed": t.seed,
                    "best_epoch": o.best_epoch,
                    "acc": o.best.acc_asc,
                    "f1": o.best.f1_asc,
                    "f1_ate": o.best.f1_ate,
                    "checkpoint": saved.as_ref().map(|p| p.display().to_string()),
                });
                out.emit(&record, || {
                    let ate = o.best.f1_ate.map(|f| format!(" f1_ate={:.2}", 100.0 * f)).unwrap_or_default();
                    format!(
                        "{}: acc={:.2} f1={:.2}{ate} (epoch {})",
                        o.trial_name,
                        100.0 * o.best.acc_asc,
                        100.0 * o.best.f1_asc,
                        o.best_epoch
                    )
                })
                .map_err(|e| CliError::io("<stdout>", e))?;
            }
            Err(e) => {
                failed += 1;
                eprintln!("error: trial {} on {} seed {}: {e}", t.model_id, t.dataset, t.seed);
            }
        }
    }

    let series = recorder.snapshot();
    if !series.is_empty() {
        std::fs::create_dir_all(&args.report_dir).map_err(|e| CliError::io(&args.report_dir, e))?;
        export_table(&series, &args.report_dir.join("metrics.csv"))?;
        render(&series, &args.report_dir, &ReportKind::ALL, &RenderOptions::default())?;
    }
    if failed > 0 {
        return Err(CliError::Failed(format!("{failed} of {} trials failed", trials.len())));
    }
    Ok(())
}
