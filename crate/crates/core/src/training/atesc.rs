use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::TrainError;
use crate::corpus::IobTag;
use crate::AbsaExample;

const TAGS: usize = 3;

fn shape(token: &str) -> String {
    let mut out = String::new();
    for c in token.chars() {
        let s = if c.is_uppercase() {
            'X'
        } else if c.is_lowercase() {
            'x'
        } else if c.is_numeric() {
            'd'
        } else {
            c
        };
        if !out.ends_with(s) {
            out.push(s);
        }
    }
    out
}

/// Emission feature strings of token `i`.
pub fn emission_features(tokens: &[String], i: usize) -> Vec<String> {
    let lower = |j: usize| tokens[j].to_lowercase();
    let cur = lower(i);
    let prev = if i > 0 { lower(i - 1) } else { "<s>".to_string() };
    let next = if i + 1 < tokens.len() { lower(i + 1) } else { "</s>".to_string() };
    let chars: Vec<char> = cur.chars().collect();
    let suffix: String = chars[chars.len().saturating_sub(3)..].iter().collect();
    vec![
        "bias".to_string(),
        format!("w={cur}"),
        format!("w-1={prev}"),
        format!("w+1={next}"),
        format!("w-1|w={prev}|{cur}"),
        format!("suf3={suffix}"),
        format!("shape={}", shape(&tokens[i])),
    ]
}

/// Weights of the IOB sequence tagger. Transitions `O -> I-ASP` and
/// `start -> I-ASP` are excluded during decoding regardless of weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Tagger {
    feature_names: Vec<String>,
    index: HashMap<String, usize>,
    /// Per feature, one weight per tag.
    pub emission: Vec<[f64; TAGS]>,
    /// `transition[prev][next]`.
    pub transition: [[f64; TAGS]; TAGS],
    pub start: [f64; TAGS],
}

impl Tagger {
    pub fn from_parts(
        feature_names: Vec<String>,
        emission: Vec<[f64; TAGS]>,
        transition: [[f64; TAGS]; TAGS],
        start: [f64; TAGS],
    ) -> Self {
        let index = feature_names.iter().enumerate().map(|(i, f)| (f.clone(), i)).collect();
        Tagger { feature_names, index, emission, transition, start }
    }

    fn empty() -> Self {
        Self::from_parts(Vec::new(), Vec::new(), [[0.0; TAGS]; TAGS], [0.0; TAGS])
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    fn intern(&mut self, feature: String) -> usize {
        if let Some(&i) = self.index.get(&feature) {
            return i;
        }
        let i = self.feature_names.len();
        self.index.insert(feature.clone(), i);
        self.feature_names.push(feature);
        self.emission.push([0.0; TAGS]);
        i
    }

    fn lookup(&self, tokens: &[String]) -> Vec<Vec<usize>> {
        (0..tokens.len())
            .map(|i| emission_features(tokens, i).iter().filter_map(|f| self.index.get(f).copied()).collect())
            .collect()
    }

    /// Best tag sequence; always a valid IOB sequence.
    pub fn decode(&self, tokens: &[String]) -> Vec<IobTag> {
        self.viterbi(&self.lookup(tokens))
    }

    #[allow(clippy::needless_range_loop)]
    fn viterbi(&self, feats: &[Vec<usize>]) -> Vec<IobTag> {
        let n = feats.len();
        if n == 0 {
            return Vec::new();
        }
        let emit = |i: usize, t: usize| feats[i].iter().map(|&f| self.emission[f][t]).sum::<f64>();
        let inside = IobTag::Inside.index();
        let outside = IobTag::O.index();
        let mut score = vec![[f64::NEG_INFINITY; TAGS]; n];
        let mut back = vec![[0usize; TAGS]; n];
        for t in 0..TAGS {
            if t != inside {
                score[0][t] = self.start[t] + emit(0, t);
            }
        }
        for i in 1..n {
            for t in 0..TAGS {
                let mut best = (f64::NEG_INFINITY, 0);
                for p in 0..TAGS {
                    if t == inside && p == outside {
                        continue;
                    }
                    let s = score[i - 1][p] + self.transition[p][t];
                    if s > best.0 {
                        best = (s, p);
                    }
                }
                score[i][t] = best.0 + emit(i, t);
                back[i][t] = best.1;
            }
        }
        let mut t = 0;
        for k in 1..TAGS {
            if score[n - 1][k] > score[n - 1][t] {
                t = k;
            }
        }
        let mut tags = vec![IobTag::O; n];
        for i in (0..n).rev() {
            tags[i] = IobTag::ALL[t];
            t = back[i][t];
        }
        tags
    }
}

/// Running sums of the averaged perceptron: `w` is the current weight and
/// `u` accumulates `step * delta`, so the average is `w - u / step`.
struct Averager {
    current: Tagger,
    acc_emission: Vec<[f64; TAGS]>,
    acc_transition: [[f64; TAGS]; TAGS],
    acc_start: [f64; TAGS],
    step: f64,
}

impl Averager {
    fn bump_emission(&mut self, f: usize, t: usize, d: f64) {
        self.current.emission[f][t] += d;
        self.acc_emission[f][t] += self.step * d;
    }

    fn update(&mut self, feats: &[Vec<usize>], gold: &[IobTag], pred: &[IobTag], d: f64) {
        let mut prev: Option<usize> = None;
        for (i, tag) in gold.iter().enumerate() {
            let t = tag.index();
            for &f in &feats[i] {
                self.bump_emission(f, t, d);
            }
            match prev {
                None => {
                    self.current.start[t] += d;
                    self.acc_start[t] += self.step * d;
                }
                Some(p) => {
                    self.current.transition[p][t] += d;
                    self.acc_transition[p][t] += self.step * d;
                }
            }
            prev = Some(t);
        }
        if !pred.is_empty() {
            self.update(feats, pred, &[], -d);
        }
    }

    fn averaged(&self) -> Tagger {
        let avg = |w: f64, u: f64| w - u / self.step;
        let emission = self
            .current
            .emission
            .iter()
            .zip(&self.acc_emission)
            .map(|(w, u)| std::array::from_fn(|t| avg(w[t], u[t])))
            .collect();
        let transition =
            std::array::from_fn(|p| std::array::from_fn(|t| avg(self.current.transition[p][t], self.acc_transition[p][t])));
        let start = std::array::from_fn(|t| avg(self.current.start[t], self.acc_start[t]));
        Tagger::from_parts(self.current.feature_names.clone(), emission, transition, start)
    }
}

/// Train the tagger. `on_epoch` scores the averaged weights after every
/// epoch; the best-scoring snapshot is returned (earliest on ties).
pub(crate) fn fit<F>(epochs: usize, seed: u64, train: &[AbsaExample], mut on_epoch: F) -> Result<Tagger, TrainError>
where
    F: FnMut(usize, &Tagger) -> Result<f64, TrainError>,
{
    if train.iter().all(|e| e.is_empty()) {
        return Err(TrainError::EmptyTrainSplit);
    }
    let mut tagger = Tagger::empty();
    let data: Vec<(Vec<Vec<usize>>, Vec<IobTag>)> = train
        .iter()
        .filter(|e| !e.is_empty())
        .map(|e| {
            let feats = (0..e.len())
                .map(|i| emission_features(e.tokens(), i).into_iter().map(|f| tagger.intern(f)).collect())
                .collect();
            (feats, IobTag::encode(e))
        })
        .collect();
    let n_features = tagger.feature_names.len();
    let mut avg = Averager {
        current: tagger,
        acc_emission: vec![[0.0; TAGS]; n_features],
        acc_transition: [[0.0; TAGS]; TAGS],
        acc_start: [0.0; TAGS],
        step: 1.0,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut best: Option<(f64, Tagger)> = None;
    for epoch in 1..=epochs {
        order.shuffle(&mut rng);
        for &k in &order {
            let (feats, gold) = &data[k];
            let pred = avg.current.viterbi(feats);
            if pred != *gold {
                avg.update(feats, gold, &pred, 1.0);
            }
            avg.step += 1.0;
        }
        let snapshot = avg.averaged();
        let score = on_epoch(epoch, &snapshot)?;
        if best.as_ref().is_none_or(|(s, _)| score > *s) {
            best = Some((score, snapshot));
        }
    }
    Ok(best.map(|(_, t)| t).unwrap_or_else(|| avg.averaged()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decoding_respects_iob_even_with_adversarial_weights() {
        let mut t = Tagger::from_parts(vec!["bias".into()], vec![[0.0, 0.0, 100.0]], [[0.0; TAGS]; TAGS], [0.0; TAGS]);
        t.transition[IobTag::O.index()][IobTag::Inside.index()] = 50.0;
        let tokens: Vec<String> = "a b c".split(' ').map(String::from).collect();
        let tags = t.decode(&tokens);
        assert_ne!(tags[0], IobTag::Inside);
        for w in tags.windows(2) {
            assert!(IobTag::allows(Some(w[0]), w[1]));
        }
        assert!(t.decode(&[]).is_empty());
    }

    #[test]
    fn shape_collapses_runs() {
        assert_eq!(shape("Pizza42!"), "Xxd!");
    }
}
