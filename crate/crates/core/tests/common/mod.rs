//! Fixtures and random generators shared by the integration tests.
#![allow(dead_code)]

use std::path::Path;

use absakit::corpus::examples_to_triples;
use absakit::dataset::LoadedDataset;
use absakit::{AbsaExample, AspectSpan, AscTriple, Corpus, Polarity, TaskKind};
use rand::seq::SliceRandom;
use rand::Rng;

/// Characters that exercise escaping and marker handling without forming
/// whitespace.
const CHARS: &[char] = &[
    'a', 'b', 'c', 'x', 'Z', '0', '9', '$', '[', ']', '-', '.', ',', '#', 'ü', 'é', '中', '文', '\'', '"', 'T', 'B',
    'E', 'A', 'S', 'P', 'L',
];

pub fn random_token<R: Rng>(rng: &mut R) -> String {
    loop {
        let len = rng.gen_range(1..=6);
        let tok: String = (0..len).map(|_| *CHARS.choose(rng).unwrap()).collect();
        if absakit::corpus::check_token(0, &tok).is_ok() {
            return tok;
        }
    }
}

pub fn random_polarity<R: Rng>(rng: &mut R) -> Polarity {
    Polarity::ALL[rng.gen_range(0..3)]
}

/// A valid example with 1..=max_len tokens and random disjoint spans.
pub fn random_example<R: Rng>(rng: &mut R, max_len: usize) -> AbsaExample {
    let len = rng.gen_range(1..=max_len);
    let tokens: Vec<String> = (0..len).map(|_| random_token(rng)).collect();
    let mut spans = Vec::new();
    let mut i = 0;
    while i < len {
        if rng.gen_bool(0.25) {
            let end = (i + rng.gen_range(0..3)).min(len - 1);
            spans.push(AspectSpan::new(i, end, random_polarity(rng)));
            i = end + 2;
        } else {
            i += 1;
        }
    }
    AbsaExample::new(tokens, spans).unwrap()
}

pub fn random_examples<R: Rng>(rng: &mut R, max_count: usize, max_len: usize) -> Vec<AbsaExample> {
    let n = rng.gen_range(0..=max_count);
    (0..n).map(|_| random_example(rng, max_len)).collect()
}

pub fn random_triples<R: Rng>(rng: &mut R, max_count: usize, max_len: usize) -> Vec<AscTriple> {
    examples_to_triples(&random_examples(rng, max_count, max_len))
}

/// Sorted (aspect, polarity) pairs of a corpus.
pub fn aspect_multiset(corpus: &Corpus) -> Vec<(String, Polarity)> {
    let mut pairs = corpus.aspect_pairs();
    pairs.sort();
    pairs
}

const ASPECTS: [&str; 8] = ["food", "service", "screen", "battery", "staff", "price", "keyboard", "wine"];
const FILLER: [&str; 8] = ["the", "was", "really", "today", "and", "quite", "overall", "honestly"];

/// ASC triples whose label is decided by a single "good"/"bad" token.
pub fn separable_triples<R: Rng>(rng: &mut R, n: usize) -> Vec<AscTriple> {
    (0..n)
        .map(|_| {
            let positive = rng.gen_bool(0.5);
            let mut words: Vec<&str> = (0..rng.gen_range(3..8)).map(|_| *FILLER.choose(rng).unwrap()).collect();
            let at = rng.gen_range(0..=words.len());
            words.insert(at, "$T$");
            let cue = rng.gen_range(0..=words.len());
            words.insert(cue, if positive { "good" } else { "bad" });
            AscTriple {
                template: words.join(" "),
                aspect: ASPECTS.choose(rng).unwrap().to_string(),
                polarity: if positive { Polarity::Positive } else { Polarity::Negative },
            }
        })
        .collect()
}

pub fn separable_dataset<R: Rng>(rng: &mut R, name: &str, train: usize, test: usize) -> LoadedDataset {
    LoadedDataset {
        name: name.into(),
        task: TaskKind::Asc,
        train: Corpus::Triples(separable_triples(rng, train)),
        valid: Corpus::Triples(Vec::new()),
        test: Corpus::Triples(separable_triples(rng, test)),
    }
}

/// Small ATESC corpus in which "staff" is always the aspect.
pub fn staff_examples() -> Vec<AbsaExample> {
    let mk = |text: &str, start: usize, pol: Polarity| {
        AbsaExample::from_text(text).unwrap().with_spans(vec![AspectSpan::new(start, start, pol)]).unwrap()
    };
    vec![
        mk("the staff was friendly", 1, Polarity::Positive),
        mk("rude staff and slow", 1, Polarity::Negative),
        mk("staff were so nice", 0, Polarity::Positive),
        mk("we liked the staff a lot", 3, Polarity::Positive),
        mk("the staff was horrible", 1, Polarity::Negative),
    ]
}

pub fn staff_dataset() -> LoadedDataset {
    LoadedDataset {
        name: "staff".into(),
        task: TaskKind::Atesc,
        train: Corpus::Examples(staff_examples()),
        valid: Corpus::Examples(staff_examples()),
        test: Corpus::Examples(Vec::new()),
    }
}

/// Write `n` ASC triples (any content) to `path`.
pub fn write_triples<R: Rng>(rng: &mut R, path: &Path, n: usize) {
    let triples = separable_triples(rng, n);
    std::fs::write(path, absakit::corpus::serialize_asc_triples(&triples)).unwrap();
}
