//! Predictor contract, the bundled baseline models and the trial loop.
//!
//! Two desk-scale baselines stand behind [`Predictor`]:
//!
//! * ASC: bag-of-words multinomial logistic regression with context
//!   weighting around the aspect (`lr-bow`, `lr-cdw`, `lr-cdm`).
//! * ATESC: averaged structured perceptron over IOB tags with Viterbi
//!   decoding, plus an ASC model for span polarity (`perceptron-iob`).
//!
//! Training is deterministic for a given config, seed and corpus.

mod asc;
mod atesc;
mod eval;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use asc::{
    argmax, featurize_asc, loss, loss_and_gradient, softmax, AscModel, AscParams, FeatureConfig, IndexedFeatures,
    LABELS,
};
pub use atesc::{emission_features, Tagger};
pub use eval::{accuracy, evaluate, macro_f1, span_f1, EvalResult, SpanScore};

use crate::config::{check, ConfigDiagnostic, RunConfig};
use crate::corpus::{triple_to_example, CorpusError, IobTag};
use crate::dataset::LoadedDataset;
use crate::metrics::{MetricError, TrialSeries};
use crate::{AbsaExample, AspectSpan, Corpus, Polarity, TaskKind};

/// Share of the training split held out when a dataset has no validation split.
pub const HOLDOUT_FRACTION: f64 = 0.1;

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error("invalid configuration: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    Config(Vec<ConfigDiagnostic>),
    #[error("config is for {config} but dataset `{dataset}` is {actual}")]
    TaskMismatch { config: TaskKind, dataset: String, actual: TaskKind },
    #[error("training split has no usable examples")]
    EmptyTrainSplit,
    #[error("model has an empty vocabulary (not trained)")]
    VocabularyEmpty,
    #[error("evaluation corpus is empty")]
    EmptyCorpus,
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Metric(#[from] MetricError),
}

/// One predicted aspect.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpanPrediction {
    pub start: usize,
    pub end: usize,
    pub polarity: Polarity,
    /// Probability of `polarity`, in `[0, 1]`.
    pub confidence: f64,
}

/// Output of a predictor for one sentence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Inference {
    pub tokens: Vec<String>,
    pub spans: Vec<SpanPrediction>,
}

impl Inference {
    pub fn to_example(&self) -> AbsaExample {
        let spans = self.spans.iter().map(|s| AspectSpan::new(s.start, s.end, s.polarity)).collect();
        AbsaExample::new(self.tokens.clone(), spans).expect("predictors emit valid spans")
    }
}

/// Anything that turns sentences into aspect predictions.
///
/// ASC predictors classify every span already present on the input. ATESC
/// predictors ignore input spans and extract their own.
pub trait Predictor: Send + Sync {
    fn task(&self) -> TaskKind;

    fn infer(&self, example: &AbsaExample) -> Result<Inference, TrainError>;
}

/// ATESC baseline: IOB tagger plus polarity classifier for extracted spans.
#[derive(Debug, Clone, PartialEq)]
pub struct AtescModel {
    pub tagger: Tagger,
    pub polarity: AscModel,
}

impl AtescModel {
    /// Extract and classify aspects; spans already on `example` are ignored.
    pub fn predict(&self, example: &AbsaExample) -> Result<Inference, TrainError> {
        if self.tagger.feature_names().is_empty() {
            return Err(TrainError::VocabularyEmpty);
        }
        let tokens = example.tokens();
        let tags = self.tagger.decode(tokens);
        let spans = IobTag::decode(&tags)
            .into_iter()
            .map(|(start, end)| {
                let (polarity, confidence) =
                    self.polarity.predict(example, &AspectSpan::new(start, end, Polarity::Neutral))?;
                Ok(SpanPrediction { start, end, polarity, confidence })
            })
            .collect::<Result<_, TrainError>>()?;
        Ok(Inference { tokens: tokens.to_vec(), spans })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelKind {
    Asc(AscModel),
    Atesc(AtescModel),
}

/// A trained baseline with the id it was trained as.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub model_id: String,
    pub kind: ModelKind,
}

impl Predictor for TrainedModel {
    fn task(&self) -> TaskKind {
        match self.kind {
            ModelKind::Asc(_) => TaskKind::Asc,
            ModelKind::Atesc(_) => TaskKind::Atesc,
        }
    }

    fn infer(&self, example: &AbsaExample) -> Result<Inference, TrainError> {
        match &self.kind {
            ModelKind::Asc(m) => {
                let spans = example
                    .spans()
                    .iter()
                    .map(|s| {
                        let (polarity, confidence) = m.predict(example, s)?;
                        Ok(SpanPrediction { start: s.start, end: s.end, polarity, confidence })
                    })
                    .collect::<Result<_, TrainError>>()?;
                Ok(Inference { tokens: example.tokens().to_vec(), spans })
            }
            ModelKind::Atesc(m) => m.predict(example),
        }
    }
}

impl<P: Predictor + ?Sized> Predictor for std::sync::Arc<P> {
    fn task(&self) -> TaskKind {
        (**self).task()
    }

    fn infer(&self, example: &AbsaExample) -> Result<Inference, TrainError> {
        (**self).infer(example)
    }
}

impl<P: Predictor + ?Sized> Predictor for Box<P> {
    fn task(&self) -> TaskKind {
        (**self).task()
    }

    fn infer(&self, example: &AbsaExample) -> Result<Inference, TrainError> {
        (**self).infer(example)
    }
}

/// Every (sentence, aspect) pair of a corpus.
pub fn asc_instances(corpus: &Corpus) -> Result<Vec<(AbsaExample, AspectSpan)>, CorpusError> {
    match corpus {
        Corpus::Triples(triples) => triples
            .iter()
            .enumerate()
            .map(|(g, t)| {
                let ex = triple_to_example(t).map_err(|e| e.at_line(g * 3 + 1))?;
                let span = ex.spans()[0];
                Ok((ex, span))
            })
            .collect(),
        Corpus::Examples(examples) => {
            Ok(examples.iter().flat_map(|e| e.spans().iter().map(move |s| (e.clone(), *s))).collect())
        }
    }
}

/// Split `items` into (train, held-out) with a seeded shuffle.
fn hold_out<T: Clone>(items: &[T], seed: u64) -> (Vec<T>, Vec<T>) {
    if items.len() < 2 {
        return (items.to_vec(), items.to_vec());
    }
    let mut order: Vec<usize> = (0..items.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_hold = ((items.len() as f64 * HOLDOUT_FRACTION).ceil() as usize).clamp(1, items.len() - 1);
    let mut held: Vec<usize> = order[..n_hold].to_vec();
    let mut kept: Vec<usize> = order[n_hold..].to_vec();
    held.sort_unstable();
    kept.sort_unstable();
    (kept.iter().map(|&i| items[i].clone()).collect(), held.iter().map(|&i| items[i].clone()).collect())
}

/// Result of one training trial.
#[derive(Debug, Clone)]
pub struct TrialOutcome {
    pub trial_name: String,
    pub seed: u64,
    pub model: TrainedModel,
    /// Per-epoch validation metrics in percent: `Acc`, `F1` and, for ATESC, `F1_ATE`.
    pub series: Vec<TrialSeries>,
    pub best: EvalResult,
    pub best_epoch: usize,
}

pub fn trial_name(config: &RunConfig, dataset: &str, seed: u64) -> String {
    format!("{}-{}-seed{}", config.model_id, dataset, seed)
}

struct EpochLog {
    series: Vec<TrialSeries>,
    best: Option<(f64, usize, EvalResult)>,
}

impl EpochLog {
    fn new(trial: &str, task: TaskKind) -> Self {
        let mut names = vec!["Acc", "F1"];
        if task == TaskKind::Atesc {
            names.push("F1_ATE");
        }
        EpochLog { series: names.into_iter().map(|m| TrialSeries::new(trial, m)).collect(), best: None }
    }

    fn push(&mut self, epoch: usize, r: EvalResult) -> Result<f64, TrainError> {
        self.series[0].push(r.acc_asc * 100.0)?;
        self.series[1].push(r.f1_asc * 100.0)?;
        if let Some(ate) = r.f1_ate {
            self.series[2].push(ate * 100.0)?;
        }
        let score = r.selection_score();
        if self.best.as_ref().is_none_or(|(s, _, _)| score > *s) {
            self.best = Some((score, epoch, r));
        }
        Ok(score)
    }
}

/// Train with the first configured seed.
pub fn train(config: &RunConfig, data: &LoadedDataset) -> Result<TrialOutcome, TrainError> {
    let seed = *config.seeds.first().ok_or_else(|| TrainError::Config(check(config)))?;
    train_trial(config, data, seed)
}

/// Train one trial. Validation uses the dataset's validation split, or a
/// held-out tenth of the training split (shuffled with the first
/// configured seed) when there is none. The best-validation model is kept.
pub fn train_trial(config: &RunConfig, data: &LoadedDataset, seed: u64) -> Result<TrialOutcome, TrainError> {
    let diagnostics = check(config);
    if !diagnostics.is_empty() {
        return Err(TrainError::Config(diagnostics));
    }
    if config.task != data.task {
        return Err(TrainError::TaskMismatch { config: config.task, dataset: data.name.clone(), actual: data.task });
    }
    let split_seed = config.seeds[0];
    let name = trial_name(config, &data.name, seed);
    let mut log = EpochLog::new(&name, config.task);

    let model = match config.task {
        TaskKind::Asc => {
            let all = asc_instances(&data.train)?;
            if all.is_empty() {
                return Err(TrainError::EmptyTrainSplit);
            }
            let (train, valid) = if data.valid.is_empty() {
                hold_out(&all, split_seed)
            } else {
                (all, asc_instances(&data.valid)?)
            };
            let valid_corpus = instances_corpus(&valid);
            let model = asc::fit(config, seed, &train, |epoch, m| {
                let probe = TrainedModel { model_id: config.model_id.clone(), kind: ModelKind::Asc(m.clone()) };
                log.push(epoch, evaluate(&probe, &valid_corpus)?)
            })?;
            ModelKind::Asc(model)
        }
        TaskKind::Atesc => {
            let all = data.train.clone().into_examples()?;
            let (train, valid) = if data.valid.is_empty() {
                hold_out(&all, split_seed)
            } else {
                (all, data.valid.clone().into_examples()?)
            };
            let span_train: Vec<(AbsaExample, AspectSpan)> =
                train.iter().flat_map(|e| e.spans().iter().map(move |s| (e.clone(), *s))).collect();
            let span_valid = instances_corpus(
                &valid.iter().flat_map(|e| e.spans().iter().map(move |s| (e.clone(), *s))).collect::<Vec<_>>(),
            );
            let polarity = asc::fit(config, seed, &span_train, |_, m| {
                if span_valid.is_empty() {
                    return Ok(0.0);
                }
                let probe = TrainedModel { model_id: "lr-bow".into(), kind: ModelKind::Asc(m.clone()) };
                Ok(evaluate(&probe, &span_valid)?.acc_asc)
            })?;
            let valid_corpus = Corpus::Examples(valid);
            let tagger = atesc::fit(config.epochs, seed, &train, |epoch, t| {
                let probe = TrainedModel {
                    model_id: config.model_id.clone(),
                    kind: ModelKind::Atesc(AtescModel { tagger: t.clone(), polarity: polarity.clone() }),
                };
                log.push(epoch, evaluate(&probe, &valid_corpus)?)
            })?;
            ModelKind::Atesc(AtescModel { tagger, polarity })
        }
    };
    let (_, best_epoch, best) = log.best.expect("at least one epoch");
    Ok(TrialOutcome {
        trial_name: name,
        seed,
        model: TrainedModel { model_id: config.model_id.clone(), kind: model },
        series: log.series,
        best,
        best_epoch,
    })
}

fn instances_corpus(instances: &[(AbsaExample, AspectSpan)]) -> Corpus {
    Corpus::Examples(instances.iter().map(|(e, s)| e.with_spans(vec![*s]).expect("valid span")).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::defaults;
    use crate::AscTriple;

    fn separable(n: usize) -> Corpus {
        let fillers = ["the", "really", "was", "quite", "today", "service", "and", "very"];
        Corpus::Triples(
            (0..n)
                .map(|i| {
                    let good = i % 2 == 0;
                    let word = if good { "good" } else { "bad" };
                    let a = fillers[i % fillers.len()];
                    let b = fillers[(i * 3 + 1) % fillers.len()];
                    AscTriple {
                        template: format!("{a} $T$ {b} {word} {}", fillers[(i / 2) % fillers.len()]),
                        aspect: "food".into(),
                        polarity: if good { Polarity::Positive } else { Polarity::Negative },
                    }
                })
                .collect(),
        )
    }

    #[test]
    fn asc_learns_separable_corpus_deterministically() {
        let data = LoadedDataset {
            name: "sep".into(),
            task: TaskKind::Asc,
            train: separable(200),
            valid: Corpus::Triples(Vec::new()),
            test: separable(40),
        };
        let cfg = defaults(TaskKind::Asc);
        let a = train(&cfg, &data).unwrap();
        let b = train(&cfg, &data).unwrap();
        assert_eq!(a.model, b.model);
        assert!(evaluate(&a.model, &data.test).unwrap().acc_asc >= 0.95);
        assert_eq!(a.series[0].values.len(), 10);
    }

    #[test]
    fn atesc_memorizes_staff() {
        let mk = |text: &str, start: usize, pol: Polarity| {
            AbsaExample::from_text(text).unwrap().with_spans(vec![AspectSpan::new(start, start, pol)]).unwrap()
        };
        let examples = vec![
            mk("the staff was friendly", 1, Polarity::Positive),
            mk("rude staff and slow", 1, Polarity::Negative),
            mk("staff were so nice", 0, Polarity::Positive),
            mk("we liked the staff a lot", 3, Polarity::Positive),
        ];
        let data = LoadedDataset {
            name: "staff".into(),
            task: TaskKind::Atesc,
            train: Corpus::Examples(examples.clone()),
            valid: Corpus::Examples(examples),
            test: Corpus::Examples(Vec::new()),
        };
        let out = train(&defaults(TaskKind::Atesc), &data).unwrap();
        let inference = out.model.infer(&AbsaExample::from_text("But the staff was so nice to us .").unwrap()).unwrap();
        let spans: Vec<(usize, usize)> = inference.spans.iter().map(|s| (s.start, s.end)).collect();
        assert_eq!(spans, vec![(2, 2)]);
        assert_eq!(out.series.len(), 3);
        let empty = out.model.infer(&AbsaExample::new(Vec::new(), Vec::new()).unwrap()).unwrap();
        assert!(empty.spans.is_empty());
    }

    #[test]
    fn hold_out_takes_a_tenth() {
        let items: Vec<u32> = (0..50).collect();
        let (kept, held) = hold_out(&items, 7);
        assert_eq!((kept.len(), held.len()), (45, 5));
        assert_eq!(hold_out(&items, 7), (kept, held));
    }
}
