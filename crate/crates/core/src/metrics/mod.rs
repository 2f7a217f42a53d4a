//! Metric recording across trials, summary statistics, statistical
//! comparisons and static report emission.
//!
//! A [`MetricRecorder`] collects values into [`TrialSeries`], one per
//! (trial, metric) pair. Reports are deterministic SVG files plus CSV.

mod plot;
mod stats;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use parking_lot::Mutex;
use serde::{Deserialize, Serialize};

pub use plot::{render, ReportKind, RenderOptions};
pub use stats::{
    a12, chi_square_critical, mean, quantile_sorted, rank_sum_exact, rank_sum_normal, rank_sum_test, scott_knott,
    summarize, Group, SummaryStats, EXACT_RANK_SUM_LIMIT,
};

#[derive(Debug, thiserror::Error)]
pub enum MetricError {
    #[error("metric `{metric}` received non-finite value {value}")]
    NonFiniteValue { metric: String, value: f64 },
    #[error("series is empty")]
    EmptySeries,
    #[error("sample is empty")]
    EmptySample,
    #[error("group `{0}` has no values")]
    EmptyGroup(String),
    #[error("rank-sum test needs at least 2 values per sample, got {a} and {b}")]
    TooFewSamples { a: usize, b: usize },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Table { path: PathBuf, message: String },
}

impl MetricError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        MetricError::Io { path: path.to_path_buf(), source }
    }
}

/// Values of one metric within one trial, in recording order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSeries {
    pub trial_name: String,
    pub metric_name: String,
    pub values: Vec<f64>,
}

impl TrialSeries {
    pub fn new(trial_name: impl Into<String>, metric_name: impl Into<String>) -> Self {
        TrialSeries { trial_name: trial_name.into(), metric_name: metric_name.into(), values: Vec::new() }
    }

    pub fn push(&mut self, value: f64) -> Result<(), MetricError> {
        if !value.is_finite() {
            return Err(MetricError::NonFiniteValue { metric: self.metric_name.clone(), value });
        }
        self.values.push(value);
        Ok(())
    }

    pub fn summary(&self) -> Result<SummaryStats, MetricError> {
        summarize(&self.values)
    }
}

/// Results-table cell: mean and standard deviation to two decimals.
pub fn mean_std_cell(mean: f64, std: f64) -> String {
    format!("{mean:.2}({std:.2})")
}

#[derive(Debug, Default)]
struct RecorderState {
    /// (trial name, metric name → values), in trial order.
    trials: Vec<(String, BTreeMap<String, Vec<f64>>)>,
}

/// Thread-safe collector of metric values grouped by trial.
///
/// Recording starts in trial 1. `record` appends to the current trial and
/// `next_trial` opens a new one.
#[derive(Debug, Default)]
pub struct MetricRecorder {
    state: Mutex<RecorderState>,
}

impl MetricRecorder {
    pub fn new() -> Self {
        Self::default()
    }

    fn current(state: &mut RecorderState) -> &mut BTreeMap<String, Vec<f64>> {
        if state.trials.is_empty() {
            state.trials.push(("trial1".to_string(), BTreeMap::new()));
        }
        &mut state.trials.last_mut().expect("nonempty").1
    }

    pub fn record(&self, metric: &str, value: f64) -> Result<(), MetricError> {
        if !value.is_finite() {
            return Err(MetricError::NonFiniteValue { metric: metric.to_string(), value });
        }
        let mut state = self.state.lock();
        Self::current(&mut state).entry(metric.to_string()).or_default().push(value);
        Ok(())
    }

    /// Start a new trial named `trial<k>`.
    pub fn next_trial(&self) {
        let mut state = self.state.lock();
        let name = format!("trial{}", state.trials.len().max(1) + 1);
        Self::current(&mut state);
        state.trials.push((name, BTreeMap::new()));
    }

    /// Start a new trial with an explicit name.
    pub fn next_named_trial(&self, name: &str) {
        self.state.lock().trials.push((name.to_string(), BTreeMap::new()));
    }

    /// Add a complete series, merging into an existing trial of that name.
    pub fn register(&self, series: &TrialSeries) -> Result<(), MetricError> {
        if let Some(bad) = series.values.iter().find(|v| !v.is_finite()) {
            return Err(MetricError::NonFiniteValue { metric: series.metric_name.clone(), value: *bad });
        }
        let mut state = self.state.lock();
        let idx = match state.trials.iter().position(|(n, _)| *n == series.trial_name) {
            Some(i) => i,
            None => {
                state.trials.push((series.trial_name.clone(), BTreeMap::new()));
                state.trials.len() - 1
            }
        };
        state.trials[idx].1.entry(series.metric_name.clone()).or_default().extend(&series.values);
        Ok(())
    }

    /// Number of trials opened so far.
    pub fn trial_count(&self) -> usize {
        self.state.lock().trials.len()
    }

    /// Consistent copy of every non-empty series, trial order first.
    pub fn snapshot(&self) -> Vec<TrialSeries> {
        let state = self.state.lock();
        state
            .trials
            .iter()
            .flat_map(|(trial, metrics)| {
                metrics.iter().filter(|(_, v)| !v.is_empty()).map(move |(metric, values)| TrialSeries {
                    trial_name: trial.clone(),
                    metric_name: metric.clone(),
                    values: values.clone(),
                })
            })
            .collect()
    }

    pub fn series(&self, trial: &str, metric: &str) -> Option<Vec<f64>> {
        let state = self.state.lock();
        state.trials.iter().find(|(t, _)| t == trial).and_then(|(_, m)| m.get(metric).cloned())
    }
}

const TABLE_HEADER: [&str; 4] = ["trial", "metric", "count", "values"];

fn join_values(values: &[f64]) -> String {
    values.iter().map(f64::to_string).collect::<Vec<_>>().join(";")
}

fn split_values(field: &str) -> Result<Vec<f64>, String> {
    if field.is_empty() {
        return Ok(Vec::new());
    }
    field.split(';').map(|v| v.parse::<f64>().map_err(|e| format!("`{v}`: {e}"))).collect()
}

/// Write one CSV row per trial and metric. Values keep full precision.
pub fn export_table(series: &[TrialSeries], path: &Path) -> Result<(), MetricError> {
    let table_err = |e: csv::Error| MetricError::Table { path: path.to_path_buf(), message: e.to_string() };
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(TABLE_HEADER).map_err(table_err)?;
    for s in series {
        w.write_record([
            s.trial_name.as_str(),
            s.metric_name.as_str(),
            &s.values.len().to_string(),
            &join_values(&s.values),
        ])
        .map_err(table_err)?;
    }
    let bytes = w.into_inner().map_err(|e| MetricError::Table { path: path.to_path_buf(), message: e.to_string() })?;
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| MetricError::io(parent, e))?;
    }
    fs::write(path, bytes).map_err(|e| MetricError::io(path, e))
}

/// Read a table written by [`export_table`].
pub fn import_table(path: &Path) -> Result<Vec<TrialSeries>, MetricError> {
    let bad = |message: String| MetricError::Table { path: path.to_path_buf(), message };
    let text = fs::read_to_string(path).map_err(|e| MetricError::io(path, e))?;
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let mut out = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| bad(e.to_string()))?;
        if row.len() != TABLE_HEADER.len() {
            return Err(bad(format!("expected {} columns, got {}", TABLE_HEADER.len(), row.len())));
        }
        let values = split_values(&row[3]).map_err(bad)?;
        let count: usize = row[2].parse().map_err(|e| bad(format!("count: {e}")))?;
        if count != values.len() {
            return Err(bad(format!("count {count} does not match {} values", values.len())));
        }
        out.push(TrialSeries { trial_name: row[0].to_string(), metric_name: row[1].to_string(), values });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn record_and_next_trial() {
        let rec = MetricRecorder::new();
        for v in [1.0, 2.0, 3.0] {
            rec.record("Acc", v).unwrap();
        }
        assert_eq!(rec.series("trial1", "Acc").unwrap().len(), 3);
        rec.next_trial();
        rec.record("Acc", 9.0).unwrap();
        assert_eq!(rec.series("trial2", "Acc").unwrap(), vec![9.0]);
        assert!(matches!(rec.record("Acc", f64::NAN), Err(MetricError::NonFiniteValue { .. })));
        assert_eq!(rec.trial_count(), 2);
    }

    #[test]
    fn mean_std_cell_format() {
        assert_eq!(mean_std_cell(84.60, 0.29), "84.60(0.29)");
    }

    #[test]
    fn table_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let rec = MetricRecorder::new();
        for t in 0..2 {
            if t > 0 {
                rec.next_trial();
            }
            rec.record("Acc", 0.1 + t as f64 / 3.0).unwrap();
            rec.record("F1", 1e-17).unwrap();
        }
        let series = rec.snapshot();
        export_table(&series, &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 5);
        assert_eq!(import_table(&path).unwrap(), series);

        export_table(&[], &path).unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap().lines().count(), 1);
        assert!(import_table(&path).unwrap().is_empty());
    }
}
