use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::TrainError;
use crate::config::{LcfMode, RunConfig};
use crate::{AbsaExample, AspectSpan, Polarity};

pub const LABELS: usize = 3;

/// How context tokens are weighted around the aspect.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub lcf: LcfMode,
    pub max_seq_len: usize,
    pub window: usize,
}

impl FeatureConfig {
    pub fn from_run(config: &RunConfig) -> Self {
        FeatureConfig { lcf: config.effective_lcf(), max_seq_len: config.max_seq_len, window: config.window }
    }

    /// Weight of a token `dist` tokens away from the aspect.
    pub fn weight(&self, dist: usize) -> f64 {
        match self.lcf {
            LcfMode::Cdw => (1.0 - dist as f64 / self.max_seq_len as f64).max(0.0),
            LcfMode::Cdm => {
                if dist <= self.window {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// Sparse bag-of-words features of one aspect in context. Tokens are
/// lowercased; aspect tokens are emitted again with an `ASP:` prefix.
/// Zero-weight features are left out and duplicates are summed.
pub fn featurize_asc(example: &AbsaExample, span: &AspectSpan, config: &FeatureConfig) -> Vec<(String, f64)> {
    let mut features: BTreeMap<String, f64> = BTreeMap::new();
    for (i, token) in example.tokens().iter().enumerate() {
        let w = config.weight(span.distance(i));
        let lower = token.to_lowercase();
        if w > 0.0 {
            *features.entry(lower.clone()).or_default() += w;
        }
        if span.contains(i) {
            *features.entry(format!("ASP:{lower}")).or_default() += 1.0;
        }
    }
    features.into_iter().collect()
}

/// Dense parameters of the multinomial logistic model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AscParams {
    pub n_features: usize,
    /// Row-major `LABELS x n_features`.
    pub weights: Vec<f64>,
    pub bias: [f64; LABELS],
}

pub type IndexedFeatures = Vec<(usize, f64)>;

impl AscParams {
    pub fn zeros(n_features: usize) -> Self {
        AscParams { n_features, weights: vec![0.0; LABELS * n_features], bias: [0.0; LABELS] }
    }

    pub fn scores(&self, x: &[(usize, f64)]) -> [f64; LABELS] {
        let mut s = self.bias;
        for (label, score) in s.iter_mut().enumerate() {
            let row = &self.weights[label * self.n_features..(label + 1) * self.n_features];
            *score += x.iter().map(|&(j, v)| row[j] * v).sum::<f64>();
        }
        s
    }
}

pub fn softmax(scores: &[f64; LABELS]) -> [f64; LABELS] {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exp = scores.map(|s| (s - max).exp());
    let z: f64 = exp.iter().sum();
    exp.map(|e| e / z)
}

/// First label with the highest value; ties go to the lowest index.
pub fn argmax(values: &[f64; LABELS]) -> usize {
    let mut best = 0;
    for i in 1..LABELS {
        if values[i] > values[best] {
            best = i;
        }
    }
    best
}

/// Mean negative log-likelihood of `batch` plus `l2/2 * |W|^2`.
pub fn loss(params: &AscParams, batch: &[(IndexedFeatures, usize)], l2: f64) -> f64 {
    let data: f64 = batch
        .iter()
        .map(|(x, y)| {
            let s = params.scores(x);
            let max = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + s.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            lse - s[*y]
        })
        .sum::<f64>()
        / batch.len() as f64;
    data + 0.5 * l2 * params.weights.iter().map(|w| w * w).sum::<f64>()
}

/// Loss of `batch` and its gradient with respect to every parameter.
pub fn loss_and_gradient(params: &AscParams, batch: &[(IndexedFeatures, usize)], l2: f64) -> (f64, AscParams) {
    let mut grad = AscParams::zeros(params.n_features);
    let scale = 1.0 / batch.len() as f64;
    for (x, y) in batch {
        let p = softmax(&params.scores(x));
        for (label, &pl) in p.iter().enumerate() {
            let delta = (pl - if label == *y { 1.0 } else { 0.0 }) * scale;
            grad.bias[label] += delta;
            let row = label * params.n_features;
            for &(j, v) in x {
                grad.weights[row + j] += delta * v;
            }
        }
    }
    for (g, w) in grad.weights.iter_mut().zip(&params.weights) {
        *g += l2 * w;
    }
    (loss(params, batch, l2), grad)
}

/// Bag-of-words logistic regression over aspect-in-context features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AscModel {
    pub features: FeatureConfig,
    /// Feature string to column, sorted.
    pub vocab: BTreeMap<String, usize>,
    pub params: AscParams,
}

impl AscModel {
    pub fn untrained(features: FeatureConfig) -> Self {
        AscModel { features, vocab: BTreeMap::new(), params: AscParams::zeros(0) }
    }

    /// Feature vector restricted to known features.
    pub fn index(&self, example: &AbsaExample, span: &AspectSpan) -> IndexedFeatures {
        featurize_asc(example, span, &self.features)
            .into_iter()
            .filter_map(|(f, v)| self.vocab.get(&f).map(|&j| (j, v)))
            .collect()
    }

    pub fn scores(&self, example: &AbsaExample, span: &AspectSpan) -> Result<[f64; LABELS], TrainError> {
        if self.vocab.is_empty() {
            return Err(TrainError::VocabularyEmpty);
        }
        Ok(self.params.scores(&self.index(example, span)))
    }

    /// Most likely polarity and its softmax probability.
    pub fn predict(&self, example: &AbsaExample, span: &AspectSpan) -> Result<(Polarity, f64), TrainError> {
        let p = softmax(&self.scores(example, span)?);
        let best = argmax(&p);
        Ok((Polarity::from_index(best).expect("three labels"), p[best]))
    }
}

/// Fit a model with minibatch SGD, calling `on_epoch` after every epoch.
/// The callback returns a score; the best-scoring snapshot is returned
/// (earliest on ties).
pub(crate) fn fit<F>(
    config: &RunConfig,
    seed: u64,
    train: &[(AbsaExample, AspectSpan)],
    mut on_epoch: F,
) -> Result<AscModel, TrainError>
where
    F: FnMut(usize, &AscModel) -> Result<f64, TrainError>,
{
    if train.is_empty() {
        return Err(TrainError::EmptyTrainSplit);
    }
    let features = FeatureConfig::from_run(config);
    let raw: Vec<Vec<(String, f64)>> = train.iter().map(|(ex, sp)| featurize_asc(ex, sp, &features)).collect();
    let mut vocab: BTreeMap<String, usize> =
        raw.iter().flat_map(|f| f.iter().map(|(k, _)| (k.clone(), 0))).collect();
    for (i, slot) in vocab.values_mut().enumerate() {
        *slot = i;
    }
    let data: Vec<(IndexedFeatures, usize)> = raw
        .into_iter()
        .zip(train)
        .map(|(f, (_, sp))| (f.into_iter().map(|(k, v)| (vocab[&k], v)).collect(), sp.polarity.index()))
        .collect();

    let mut model = AscModel { features, params: AscParams::zeros(vocab.len()), vocab };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut best: Option<(f64, AscModel)> = None;
    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<(IndexedFeatures, usize)> = chunk.iter().map(|&i| data[i].clone()).collect();
            let (_, grad) = loss_and_gradient(&model.params, &batch, config.l2_reg);
            for (w, g) in model.params.weights.iter_mut().zip(&grad.weights) {
                *w -= config.learning_rate * g;
            }
            for (b, g) in model.params.bias.iter_mut().zip(&grad.bias) {
                *b -= config.learning_rate * g;
            }
        }
        let score = on_epoch(epoch, &model)?;
        if best.as_ref().is_none_or(|(s, _)| score > *s) {
            best = Some((score, model.clone()));
        }
    }
    Ok(best.map(|(_, m)| m).unwrap_or(model))
}
