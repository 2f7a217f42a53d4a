use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{asc_instances, Predictor, TrainError};
use crate::{Corpus, Polarity, TaskKind};

/// Evaluation scores, each a fraction in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub acc_asc: f64,
    pub f1_asc: f64,
    /// Exact-span F1, only for ATESC.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f1_ate: Option<f64>,
}

impl EvalResult {
    /// Model-selection score: accuracy for ASC, mean of both F1 scores for ATESC.
    pub fn selection_score(&self) -> f64 {
        match self.f1_ate {
            Some(ate) => (ate + self.f1_asc) / 2.0,
            None => self.acc_asc,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpanScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn f1(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// Fraction of positions where the prediction equals the gold label.
/// A missing prediction counts as wrong.
pub fn accuracy(gold: &[Polarity], pred: &[Option<Polarity>]) -> f64 {
    if gold.is_empty() {
        return 1.0;
    }
    gold.iter().zip(pred).filter(|(g, p)| Some(**g) == **p).count() as f64 / gold.len() as f64
}

/// Unweighted mean of per-label F1 over the labels present in `gold`.
pub fn macro_f1(gold: &[Polarity], pred: &[Option<Polarity>]) -> f64 {
    let labels: BTreeSet<Polarity> = gold.iter().copied().collect();
    if labels.is_empty() {
        return 1.0;
    }
    let total: f64 = labels
        .iter()
        .map(|&l| {
            let tp = gold.iter().zip(pred).filter(|(g, p)| **g == l && **p == Some(l)).count() as f64;
            let predicted = pred.iter().filter(|p| **p == Some(l)).count() as f64;
            let actual = gold.iter().filter(|g| **g == l).count() as f64;
            let precision = if predicted > 0.0 { tp / predicted } else { 0.0 };
            f1(precision, tp / actual)
        })
        .sum();
    total / labels.len() as f64
}

/// Exact-match span scores over parallel per-sentence span lists.
/// Two empty sides score 1.
pub fn span_f1(gold: &[Vec<(usize, usize)>], pred: &[Vec<(usize, usize)>]) -> SpanScore {
    let g: BTreeSet<(usize, usize, usize)> =
        gold.iter().enumerate().flat_map(|(i, s)| s.iter().map(move |&(a, b)| (i, a, b))).collect();
    let p: BTreeSet<(usize, usize, usize)> =
        pred.iter().enumerate().flat_map(|(i, s)| s.iter().map(move |&(a, b)| (i, a, b))).collect();
    if g.is_empty() && p.is_empty() {
        return SpanScore { precision: 1.0, recall: 1.0, f1: 1.0 };
    }
    let tp = g.intersection(&p).count() as f64;
    let precision = if p.is_empty() { 0.0 } else { tp / p.len() as f64 };
    let recall = if g.is_empty() { 0.0 } else { tp / g.len() as f64 };
    SpanScore { precision, recall, f1: f1(precision, recall) }
}

/// Score a predictor on a corpus.
///
/// ASC predictors are asked for each gold aspect in turn. ATESC predictors
/// see raw tokens; their polarity scores are computed over gold aspects,
/// counting an aspect that was not extracted exactly as a wrong label.
pub fn evaluate<P: Predictor + ?Sized>(model: &P, corpus: &Corpus) -> Result<EvalResult, TrainError> {
    match model.task() {
        TaskKind::Asc => {
            let instances = asc_instances(corpus)?;
            if instances.is_empty() {
                return Err(TrainError::EmptyCorpus);
            }
            let mut gold = Vec::with_capacity(instances.len());
            let mut pred = Vec::with_capacity(instances.len());
            for (ex, span) in &instances {
                let single = ex.with_spans(vec![*span]).expect("span from the same example");
                gold.push(span.polarity);
                pred.push(model.infer(&single)?.spans.first().map(|s| s.polarity));
            }
            Ok(EvalResult { acc_asc: accuracy(&gold, &pred), f1_asc: macro_f1(&gold, &pred), f1_ate: None })
        }
        TaskKind::Atesc => {
            let examples = corpus.clone().into_examples()?;
            if examples.is_empty() {
                return Err(TrainError::EmptyCorpus);
            }
            let (mut gold_spans, mut pred_spans) = (Vec::new(), Vec::new());
            let (mut gold, mut pred) = (Vec::new(), Vec::new());
            for ex in &examples {
                let raw = ex.with_spans(Vec::new()).expect("no spans");
                let inference = model.infer(&raw)?;
                for s in ex.spans() {
                    gold.push(s.polarity);
                    pred.push(
                        inference.spans.iter().find(|p| p.start == s.start && p.end == s.end).map(|p| p.polarity),
                    );
                }
                gold_spans.push(ex.spans().iter().map(|s| (s.start, s.end)).collect());
                pred_spans.push(inference.spans.iter().map(|s| (s.start, s.end)).collect());
            }
            Ok(EvalResult {
                acc_asc: accuracy(&gold, &pred),
                f1_asc: macro_f1(&gold, &pred),
                f1_ate: Some(span_f1(&gold_spans, &pred_spans).f1),
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn span_f1_hand_counted() {
        let s = span_f1(&[vec![(0, 0), (3, 4)]], &[vec![(3, 4)]]);
        assert_eq!((s.precision, s.recall), (1.0, 0.5));
        assert!((s.f1 - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(span_f1(&[vec![(0, 0)]], &[vec![(1, 1)]]).f1, 0.0);
    }

    #[test]
    fn macro_f1_uses_gold_labels_only() {
        use Polarity::*;
        let gold = [Positive, Positive, Negative];
        let pred = [Some(Positive), Some(Neutral), Some(Negative)];
        // Positive: p=1, r=0.5 -> 2/3; Negative: 1. Neutral absent from gold.
        assert!((macro_f1(&gold, &pred) - (2.0 / 3.0 + 1.0) / 2.0).abs() < 1e-12);
        assert!((accuracy(&gold, &pred) - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(macro_f1(&gold, &gold.map(Some)), 1.0);
    }
}
