//! Aspect-preserving training-data augmentation.
//!
//! The default transform applies surface edits (synonym swap, deletion and
//! local swaps) to non-aspect tokens only. Aspect tokens and polarities
//! never change, and no token moves across an aspect boundary.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::PathBuf;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{check_token, examples_to_triples, serialize, triple_to_example, CorpusError};
use crate::dataset::{DatasetError, DatasetRegistry, SplitRole};
use crate::{AbsaExample, AspectSpan, Corpus};

pub const MAX_MULTIPLIER: usize = 16;
pub const MAX_RATE: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AugmentOp {
    SynonymSwap,
    RandomDeletion,
    RandomSwap,
}

impl FromStr for AugmentOp {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "synonym_swap" => Ok(AugmentOp::SynonymSwap),
            "random_deletion" => Ok(AugmentOp::RandomDeletion),
            "random_swap" => Ok(AugmentOp::RandomSwap),
            _ => Err(format!("unknown augmentation op `{s}` (expected synonym_swap, random_deletion or random_swap)")),
        }
    }
}

impl fmt::Display for AugmentOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AugmentOp::SynonymSwap => "synonym_swap",
            AugmentOp::RandomDeletion => "random_deletion",
            AugmentOp::RandomSwap => "random_swap",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentPolicy {
    /// Augmented copies per source example.
    pub multiplier: usize,
    /// Applied in the listed order.
    pub ops: Vec<AugmentOp>,
    /// Chance that an eligible token is touched by each op.
    pub rate: f64,
    pub seed: u64,
}

impl Default for AugmentPolicy {
    fn default() -> Self {
        AugmentPolicy {
            multiplier: 1,
            ops: vec![AugmentOp::SynonymSwap, AugmentOp::RandomDeletion, AugmentOp::RandomSwap],
            rate: 0.1,
            seed: 1,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum AugmentError {
    #[error("invalid augmentation policy: {0}")]
    InvalidPolicy(String),
    #[error("lexicon line {line}: {message}")]
    Lexicon { line: usize, message: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

impl AugmentPolicy {
    pub fn validate(&self) -> Result<(), AugmentError> {
        if self.multiplier > MAX_MULTIPLIER {
            return Err(AugmentError::InvalidPolicy(format!("multiplier {} exceeds {MAX_MULTIPLIER}", self.multiplier)));
        }
        if !(0.0..=MAX_RATE).contains(&self.rate) {
            return Err(AugmentError::InvalidPolicy(format!("rate {} is outside [0, {MAX_RATE}]", self.rate)));
        }
        Ok(())
    }
}

/// Synonym sets: each word maps to the other members of its sets.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Lexicon {
    synonyms: BTreeMap<String, Vec<String>>,
}

impl Lexicon {
    /// Parse lines of tab-separated synonym sets. Blank lines and `#`
    /// comments are skipped; words are matched case-insensitively.
    pub fn parse(text: &str) -> Result<Self, AugmentError> {
        let mut sets: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let words: Vec<&str> = line.split('\t').map(str::trim).filter(|w| !w.is_empty()).collect();
            for (k, w) in words.iter().enumerate() {
                check_token(k, w).map_err(|e| AugmentError::Lexicon { line: i + 1, message: e.to_string() })?;
            }
            for w in &words {
                let entry = sets.entry(w.to_lowercase()).or_default();
                entry.extend(words.iter().filter(|o| !o.eq_ignore_ascii_case(w)).map(|o| o.to_string()));
            }
        }
        Ok(Lexicon { synonyms: sets.into_iter().map(|(k, v)| (k, v.into_iter().collect())).collect() })
    }

    pub fn synonyms(&self, word: &str) -> &[String] {
        self.synonyms.get(&word.to_lowercase()).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn is_empty(&self) -> bool {
        self.synonyms.is_empty()
    }
}

#[derive(Clone)]
enum Piece {
    Aspect(AspectSpan, Vec<String>),
    Free(Vec<String>),
}

fn pieces(example: &AbsaExample) -> Vec<Piece> {
    let tokens = example.tokens();
    let mut out = Vec::new();
    let mut at = 0;
    for span in example.spans() {
        if span.start > at {
            out.push(Piece::Free(tokens[at..span.start].to_vec()));
        }
        out.push(Piece::Aspect(*span, tokens[span.start..=span.end].to_vec()));
        at = span.end + 1;
    }
    if at < tokens.len() {
        out.push(Piece::Free(tokens[at..].to_vec()));
    }
    out
}

fn free_count(pieces: &[Piece]) -> usize {
    pieces.iter().map(|p| if let Piece::Free(t) = p { t.len() } else { 0 }).sum()
}

fn total_count(pieces: &[Piece]) -> usize {
    pieces.iter().map(|p| match p {
        Piece::Free(t) | Piece::Aspect(_, t) => t.len(),
    })
    .sum()
}

fn apply(op: AugmentOp, pieces: &mut [Piece], rate: f64, lexicon: &Lexicon, rng: &mut ChaCha8Rng) {
    match op {
        AugmentOp::SynonymSwap => {
            for p in pieces.iter_mut() {
                if let Piece::Free(tokens) = p {
                    for t in tokens.iter_mut() {
                        if rng.gen_bool(rate) {
                            let options = lexicon.synonyms(t);
                            if !options.is_empty() {
                                *t = options[rng.gen_range(0..options.len())].clone();
                            }
                        }
                    }
                }
            }
        }
        AugmentOp::RandomDeletion => {
            for p in pieces.iter_mut() {
                if let Piece::Free(tokens) = p {
                    let keep: Vec<bool> = tokens.iter().map(|_| !rng.gen_bool(rate)).collect();
                    let mut k = keep.iter();
                    tokens.retain(|_| *k.next().expect("same length"));
                }
            }
        }
        AugmentOp::RandomSwap => {
            let eligible = free_count(pieces);
            let swaps = (eligible as f64 * rate).round() as usize;
            for _ in 0..swaps {
                let mut pick = rng.gen_range(0..eligible.max(1));
                for p in pieces.iter_mut() {
                    if let Piece::Free(tokens) = p {
                        if pick < tokens.len() {
                            if tokens.len() >= 2 {
                                let other = rng.gen_range(0..tokens.len());
                                tokens.swap(pick, other);
                            }
                            break;
                        }
                        pick -= tokens.len();
                    }
                }
            }
        }
    }
}

fn rebuild(pieces: Vec<Piece>) -> AbsaExample {
    let mut tokens = Vec::new();
    let mut spans = Vec::new();
    for p in pieces {
        match p {
            Piece::Free(t) => tokens.extend(t),
            Piece::Aspect(span, t) => {
                let start = tokens.len();
                tokens.extend(t);
                spans.push(AspectSpan::new(start, tokens.len() - 1, span.polarity));
            }
        }
    }
    AbsaExample::new(tokens, spans).expect("aspect pieces stay disjoint and in order")
}

/// One augmented copy of `example`, determined by `(seed, index, copy)`.
pub fn augment_one(
    example: &AbsaExample,
    policy: &AugmentPolicy,
    lexicon: &Lexicon,
    index: usize,
    copy: usize,
) -> AbsaExample {
    let mut rng = ChaCha8Rng::seed_from_u64(policy.seed);
    rng.set_stream(index as u64 * MAX_MULTIPLIER as u64 + copy as u64);
    let mut p = pieces(example);
    for &op in &policy.ops {
        let before = total_count(&p);
        let snapshot = p.clone();
        apply(op, &mut p, policy.rate, lexicon, &mut rng);
        // A sentence without aspects must keep at least one token.
        if before > 0 && total_count(&p) == 0 {
            p = snapshot;
        }
    }
    let mut out = rebuild(p);
    out.source_id = example.source_id.clone();
    out
}

/// `multiplier` augmented copies of every example, copies of one source
/// adjacent and in source order.
pub fn augment_examples(
    examples: &[AbsaExample],
    policy: &AugmentPolicy,
    lexicon: &Lexicon,
) -> Result<Vec<AbsaExample>, AugmentError> {
    policy.validate()?;
    Ok(examples
        .par_iter()
        .enumerate()
        .flat_map_iter(|(i, ex)| (0..policy.multiplier).map(move |c| augment_one(ex, policy, lexicon, i, c)))
        .collect())
}

/// Augment a corpus, keeping its record shape. Triples are augmented one
/// aspect at a time, so every triple yields exactly `multiplier` triples.
pub fn augment(corpus: &Corpus, policy: &AugmentPolicy, lexicon: &Lexicon) -> Result<Corpus, AugmentError> {
    Ok(match corpus {
        Corpus::Examples(e) => Corpus::Examples(augment_examples(e, policy, lexicon)?),
        Corpus::Triples(t) => {
            let examples = t.iter().map(triple_to_example).collect::<Result<Vec<_>, _>>()?;
            Corpus::Triples(examples_to_triples(&augment_examples(&examples, policy, lexicon)?))
        }
    })
}

/// Write `augmented` next to the dataset's training files with an
/// `.augment` infix and attach it to the registered handle.
pub fn write_aug_files(registry: &mut DatasetRegistry, id: u32, augmented: &Corpus) -> Result<PathBuf, AugmentError> {
    let handle = registry.get_mut(id).ok_or_else(|| DatasetError::NotFound(id.to_string()))?;
    let dir = handle
        .splits
        .train
        .first()
        .and_then(|p| p.parent())
        .map(|p| p.to_path_buf())
        .ok_or_else(|| AugmentError::InvalidPolicy(format!("dataset `{}` has no training files", handle.name)))?;
    let stem: String =
        handle.name.chars().map(|c| if c.is_alphanumeric() || c == '-' || c == '_' { c } else { '_' }).collect();
    let path = dir.join(format!("{stem}.train.augment.txt"));
    let text = serialize(augmented, handle.encoding())?;
    fs::write(&path, text).map_err(|e| AugmentError::Io { path: path.clone(), source: e })?;
    handle.add_file(SplitRole::Augment, path.clone());
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Polarity;

    fn sample() -> Vec<AbsaExample> {
        (0..10)
            .map(|i| {
                AbsaExample::from_text(&format!("the great pizza {i} was really tasty but service slow"))
                    .unwrap()
                    .with_spans(vec![
                        AspectSpan::new(2, 2, Polarity::Positive),
                        AspectSpan::new(7, 7, Polarity::Negative),
                    ])
                    .unwrap()
            })
            .collect()
    }

    fn aspects(e: &AbsaExample) -> Vec<(String, Polarity)> {
        e.spans().iter().map(|s| (e.aspect_text(s), s.polarity)).collect()
    }

    #[test]
    fn counts_spans_and_determinism() {
        let lex = Lexicon::parse("great\tgood\tfine\ntasty\tdelicious\n").unwrap();
        let policy = AugmentPolicy { multiplier: 2, rate: 0.5, ..Default::default() };
        let src = sample();
        let out = augment_examples(&src, &policy, &lex).unwrap();
        assert_eq!(out.len(), 20);
        for (k, e) in out.iter().enumerate() {
            assert_eq!(aspects(e), aspects(&src[k / 2]));
        }
        assert_eq!(out, augment_examples(&src, &policy, &lex).unwrap());
        assert!(out.iter().any(|e| e.tokens() != src[0].tokens()));
        let none = AugmentPolicy { multiplier: 0, ..Default::default() };
        assert!(augment_examples(&src, &none, &lex).unwrap().is_empty());
    }

    #[test]
    fn policy_limits() {
        let lex = Lexicon::default();
        for bad in [AugmentPolicy { multiplier: 17, ..Default::default() }, AugmentPolicy { rate: 0.6, ..Default::default() }] {
            assert!(matches!(augment_examples(&[], &bad, &lex), Err(AugmentError::InvalidPolicy(_))));
        }
        assert!(Lexicon::parse("ok\tbad word\n").is_err());
    }

    #[test]
    fn spanless_sentences_keep_a_token() {
        let e = AbsaExample::from_text("just one").unwrap();
        let policy = AugmentPolicy { multiplier: 16, rate: 0.5, ops: vec![AugmentOp::RandomDeletion], seed: 3 };
        for out in augment_examples(&[e], &policy, &Lexicon::default()).unwrap() {
            assert!(!out.is_empty());
        }
    }

    #[test]
    fn written_files_extend_train_only_with_aug() {
        use crate::dataset::{load, DatasetHandle};
        use crate::TaskKind;

        let dir = tempfile::tempdir().unwrap();
        let data = dir.path().join("toy");
        fs::create_dir(&data).unwrap();
        fs::write(data.join("toy.train.txt"), "the $T$ is great\npizza\nPositive\nslow $T$ today\nservice\nNegative\n").unwrap();
        fs::write(data.join("toy.test.txt"), "nice $T$\nstaff\nPositive\n").unwrap();
        let mut reg = DatasetRegistry::new();
        let id = reg.register(DatasetHandle::from_dir(1, &data, TaskKind::Asc).unwrap()).unwrap().id;
        let before = load(reg.get(id).unwrap(), false).unwrap();
        let policy = AugmentPolicy { multiplier: 3, ..Default::default() };
        let aug = augment(&before.train, &policy, &Lexicon::default()).unwrap();
        assert_eq!(aug.len(), 6);
        let path = write_aug_files(&mut reg, id, &aug).unwrap();
        assert_eq!(SplitRole::classify(path.file_name().unwrap().to_str().unwrap()), Some(SplitRole::Augment));
        let with = load(reg.get(id).unwrap(), true).unwrap();
        assert_eq!(with.train.len(), before.train.len() + 6);
        assert_eq!(with.test, before.test);
        assert_eq!(load(reg.get(id).unwrap(), false).unwrap(), before);
        let reread = DatasetHandle::from_dir(1, &data, TaskKind::Asc).unwrap();
        assert_eq!(reread.aug_files, vec![path]);
    }
}
