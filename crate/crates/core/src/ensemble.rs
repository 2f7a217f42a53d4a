//! Vote ensembles over predictors and the model x dataset x seed training grid.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::dataset::{DatasetError, LoadedDataset};
use crate::metrics::MetricRecorder;
use crate::training::{train_trial, Inference, Predictor, SpanPrediction, TrainError, TrialOutcome};
use crate::{AbsaExample, TaskKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum NumericAgg {
    #[default]
    Mean,
    Median,
    Min,
    Max,
}

impl FromStr for NumericAgg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "mean" => Ok(NumericAgg::Mean),
            "median" => Ok(NumericAgg::Median),
            "min" => Ok(NumericAgg::Min),
            "max" => Ok(NumericAgg::Max),
            _ => Err(format!("unknown numeric aggregation `{s}` (expected mean, median, min or max)")),
        }
    }
}

impl fmt::Display for NumericAgg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NumericAgg::Mean => "mean",
            NumericAgg::Median => "median",
            NumericAgg::Min => "min",
            NumericAgg::Max => "max",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LabelAgg {
    #[default]
    MaxVote,
}

impl FromStr for LabelAgg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "max_vote" | "max-vote" => Ok(LabelAgg::MaxVote),
            _ => Err(format!("unknown label aggregation `{s}` (expected max_vote)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AggregationPolicy {
    pub numeric_agg: NumericAgg,
    pub str_agg: LabelAgg,
    /// Optional positive weight per predictor, in predictor order.
    #[serde(default)]
    pub weights: Option<Vec<f64>>,
}

#[derive(Debug, thiserror::Error)]
pub enum EnsembleError {
    #[error("an ensemble needs at least one predictor")]
    EmptyEnsemble,
    #[error("ensemble mixes {0} and {1} predictors")]
    MixedTask(TaskKind, TaskKind),
    #[error("expected {expected} positive finite weights, got {got:?}")]
    InvalidWeights { expected: usize, got: Vec<f64> },
}

/// Aggregate values independently of their order.
pub fn aggregate(values: &[f64], agg: NumericAgg) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    match agg {
        NumericAgg::Mean => v.iter().sum::<f64>() / v.len() as f64,
        NumericAgg::Median => crate::metrics::quantile_sorted(&v, 0.5),
        NumericAgg::Min => v[0],
        NumericAgg::Max => v[v.len() - 1],
    }
}

/// Label with the largest total weight; ties go to the smallest label.
pub fn max_vote<L: Ord + Clone>(votes: &[(L, f64)]) -> Option<L> {
    let mut sorted = votes.to_vec();
    sorted.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let mut totals: BTreeMap<L, f64> = BTreeMap::new();
    for (label, w) in sorted {
        *totals.entry(label).or_default() += w;
    }
    let mut best: Option<(L, f64)> = None;
    for (label, total) in totals {
        if best.as_ref().is_none_or(|(_, b)| total > *b) {
            best = Some((label, total));
        }
    }
    best.map(|(l, _)| l)
}

/// Predictors combined by vote. ASC labels every input span by vote;
/// ATESC keeps spans proposed by a strict (weighted) majority of members.
pub struct Ensemble {
    members: Vec<Arc<dyn Predictor>>,
    weights: Vec<f64>,
    policy: AggregationPolicy,
    task: TaskKind,
}

impl fmt::Debug for Ensemble {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Ensemble")
            .field("members", &self.members.len())
            .field("weights", &self.weights)
            .field("policy", &self.policy)
            .field("task", &self.task)
            .finish()
    }
}

impl Ensemble {
    pub fn new(members: Vec<Arc<dyn Predictor>>, policy: AggregationPolicy) -> Result<Self, EnsembleError> {
        let task = members.first().ok_or(EnsembleError::EmptyEnsemble)?.task();
        if let Some(other) = members.iter().map(|m| m.task()).find(|t| *t != task) {
            return Err(EnsembleError::MixedTask(task, other));
        }
        let weights = match &policy.weights {
            None => vec![1.0; members.len()],
            Some(w) => {
                if w.len() != members.len() || w.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
                    return Err(EnsembleError::InvalidWeights { expected: members.len(), got: w.clone() });
                }
                w.clone()
            }
        };
        Ok(Ensemble { members, weights, policy, task })
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    fn member_outputs(&self, example: &AbsaExample) -> Result<Vec<Inference>, TrainError> {
        self.members.par_iter().map(|m| m.infer(example)).collect()
    }
}

impl Predictor for Ensemble {
    fn task(&self) -> TaskKind {
        self.task
    }

    fn infer(&self, example: &AbsaExample) -> Result<Inference, TrainError> {
        let outputs = self.member_outputs(example)?;
        let agg = self.policy.numeric_agg;
        let spans = match self.task {
            TaskKind::Asc => example
                .spans()
                .iter()
                .enumerate()
                .map(|(k, span)| {
                    let votes: Vec<_> =
                        outputs.iter().zip(&self.weights).map(|(o, w)| (o.spans[k].polarity, *w)).collect();
                    let confidences: Vec<f64> = outputs.iter().map(|o| o.spans[k].confidence).collect();
                    SpanPrediction {
                        start: span.start,
                        end: span.end,
                        polarity: max_vote(&votes).expect("nonempty ensemble"),
                        confidence: aggregate(&confidences, agg),
                    }
                })
                .collect(),
            TaskKind::Atesc => {
                let total: f64 = self.weights.iter().sum();
                let mut support: BTreeMap<(usize, usize), Vec<(SpanPrediction, f64)>> = BTreeMap::new();
                for (o, w) in outputs.iter().zip(&self.weights) {
                    for s in &o.spans {
                        support.entry((s.start, s.end)).or_default().push((*s, *w));
                    }
                }
                support
                    .into_iter()
                    .filter(|(_, voters)| voters.iter().map(|(_, w)| w).sum::<f64>() > total / 2.0)
                    .map(|((start, end), voters)| {
                        let votes: Vec<_> = voters.iter().map(|(s, w)| (s.polarity, *w)).collect();
                        let confidences: Vec<f64> = voters.iter().map(|(s, _)| s.confidence).collect();
                        SpanPrediction {
                            start,
                            end,
                            polarity: max_vote(&votes).expect("supported span"),
                            confidence: aggregate(&confidences, agg),
                        }
                    })
                    .collect()
            }
        };
        Ok(Inference { tokens: example.tokens().to_vec(), spans })
    }
}

/// One cell of the training grid.
#[derive(Debug)]
pub struct GridTrial {
    pub model_id: String,
    pub dataset: String,
    pub seed: u64,
    /// Failure message when the trial could not run.
    pub outcome: Result<TrialOutcome, String>,
}

/// Train every (model, dataset, seed) combination.
///
/// Trials run in parallel but are returned, and registered with
/// `recorder`, in model-major, then dataset, then seed order. A failing
/// trial is recorded and the others still run. All trials share the
/// seed list of `base` for validation hold-out.
pub fn ensemble_train<F>(
    base: &RunConfig,
    models: &[String],
    datasets: &[String],
    seeds: &[u64],
    load: F,
    recorder: Option<&MetricRecorder>,
) -> Vec<GridTrial>
where
    F: Fn(&str) -> Result<LoadedDataset, DatasetError> + Sync,
{
    let loaded: Vec<Result<LoadedDataset, String>> =
        datasets.par_iter().map(|d| load(d).map_err(|e| e.to_string())).collect();
    let mut grid = Vec::with_capacity(models.len() * datasets.len() * seeds.len());
    for m in models {
        for d in 0..datasets.len() {
            for &s in seeds {
                grid.push((m, d, s));
            }
        }
    }
    let mut base = base.clone();
    if !seeds.is_empty() {
        base.seeds = seeds.to_vec();
    }
    let trials: Vec<GridTrial> = grid
        .par_iter()
        .map(|&(model, d, seed)| {
            let outcome = match &loaded[d] {
                Err(e) => Err(e.clone()),
                Ok(data) => base
                    .set("model_id", model)
                    .map_err(|e| e.to_string())
                    .and_then(|cfg| train_trial(&cfg, data, seed).map_err(|e| e.to_string())),
            };
            GridTrial { model_id: model.clone(), dataset: datasets[d].clone(), seed, outcome }
        })
        .collect();
    if let Some(rec) = recorder {
        for t in &trials {
            if let Ok(o) = &t.outcome {
                for s in &o.series {
                    rec.register(s).expect("training records finite values");
                }
            }
        }
    }
    trials
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Polarity;

    struct Fixed(Vec<SpanPrediction>, TaskKind);

    impl Predictor for Fixed {
        fn task(&self) -> TaskKind {
            self.1
        }

        fn infer(&self, example: &AbsaExample) -> Result<Inference, TrainError> {
            Ok(Inference { tokens: example.tokens().to_vec(), spans: self.0.clone() })
        }
    }

    fn asc(p: Polarity, c: f64) -> Arc<dyn Predictor> {
        Arc::new(Fixed(vec![SpanPrediction { start: 0, end: 0, polarity: p, confidence: c }], TaskKind::Asc))
    }

    fn example() -> AbsaExample {
        AbsaExample::from_text("pizza ok")
            .unwrap()
            .with_spans(vec![crate::AspectSpan::new(0, 0, Polarity::Neutral)])
            .unwrap()
    }

    #[test]
    fn votes_and_ties() {
        use Polarity::*;
        let e = Ensemble::new(vec![asc(Positive, 0.9), asc(Positive, 0.8), asc(Negative, 0.7)], Default::default())
            .unwrap();
        assert_eq!(e.infer(&example()).unwrap().spans[0].polarity, Positive);
        let tie = Ensemble::new(vec![asc(Positive, 0.2), asc(Negative, 0.4)], Default::default()).unwrap();
        let out = tie.infer(&example()).unwrap().spans[0];
        assert_eq!(out.polarity, Negative);
        assert!((out.confidence - 0.3).abs() < 1e-12);
        let weighted = AggregationPolicy { weights: Some(vec![3.0, 1.0]), ..Default::default() };
        let e = Ensemble::new(vec![asc(Positive, 0.2), asc(Negative, 0.4)], weighted).unwrap();
        assert_eq!(e.infer(&example()).unwrap().spans[0].polarity, Positive);
    }

    #[test]
    fn construction_errors() {
        assert!(matches!(Ensemble::new(Vec::new(), Default::default()), Err(EnsembleError::EmptyEnsemble)));
        let atesc: Arc<dyn Predictor> = Arc::new(Fixed(Vec::new(), TaskKind::Atesc));
        assert!(matches!(
            Ensemble::new(vec![asc(Polarity::Positive, 1.0), atesc], Default::default()),
            Err(EnsembleError::MixedTask(..))
        ));
        let bad = AggregationPolicy { weights: Some(vec![0.0]), ..Default::default() };
        assert!(Ensemble::new(vec![asc(Polarity::Positive, 1.0)], bad).is_err());
    }

    #[test]
    fn atesc_spans_need_strict_majority() {
        let span = |s, p| SpanPrediction { start: s, end: s, polarity: p, confidence: 0.5 };
        let m = |spans: Vec<SpanPrediction>| -> Arc<dyn Predictor> { Arc::new(Fixed(spans, TaskKind::Atesc)) };
        let e = Ensemble::new(
            vec![
                m(vec![span(0, Polarity::Positive), span(1, Polarity::Neutral)]),
                m(vec![span(0, Polarity::Negative)]),
                m(vec![span(0, Polarity::Positive)]),
                m(vec![span(1, Polarity::Neutral)]),
            ],
            Default::default(),
        )
        .unwrap();
        let out = e.infer(&AbsaExample::from_text("a b").unwrap()).unwrap();
        assert_eq!(out.spans.len(), 1);
        assert_eq!((out.spans[0].start, out.spans[0].polarity), (0, Polarity::Positive));
    }

    #[test]
    fn aggregates_ignore_order() {
        assert_eq!(aggregate(&[3.0, 1.0, 2.0], NumericAgg::Median), 2.0);
        assert_eq!(aggregate(&[3.0, 1.0, 2.0], NumericAgg::Min), 1.0);
        assert_eq!(aggregate(&[0.1, 0.2, 0.3], NumericAgg::Mean), aggregate(&[0.3, 0.1, 0.2], NumericAgg::Mean));
    }
}
