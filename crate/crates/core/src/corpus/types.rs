use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Placeholder marking the aspect position inside an ASC template.
pub const PLACEHOLDER: &str = "$T$";
/// Opening tag of an inline aspect region.
pub const BEGIN_TAG: &str = "[B-ASP]";
/// Closing tag of an inline aspect region.
pub const END_TAG: &str = "[E-ASP]";
/// Prefix of the optional polarity annotation following a closed region.
pub const LABEL_PREFIX: &str = "$LABEL$";

const RESERVED: [&str; 4] = [PLACEHOLDER, BEGIN_TAG, END_TAG, LABEL_PREFIX];

/// Sentiment polarity of an aspect.
///
/// The derived ordering `Negative < Neutral < Positive` is the tie-break
/// order used by every argmax and vote in the crate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Polarity {
    Negative,
    Neutral,
    Positive,
}

impl Polarity {
    pub const ALL: [Polarity; 3] = [Polarity::Negative, Polarity::Neutral, Polarity::Positive];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Polarity> {
        Self::ALL.get(index).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Polarity::Negative => "Negative",
            Polarity::Neutral => "Neutral",
            Polarity::Positive => "Positive",
        }
    }
}

impl fmt::Display for Polarity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid polarity `{0}`")]
pub struct ParsePolarityError(pub String);

impl FromStr for Polarity {
    type Err = ParsePolarityError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("positive") {
            Ok(Polarity::Positive)
        } else if s.eq_ignore_ascii_case("negative") {
            Ok(Polarity::Negative)
        } else if s.eq_ignore_ascii_case("neutral") {
            Ok(Polarity::Neutral)
        } else {
            Err(ParsePolarityError(s.to_string()))
        }
    }
}

/// Aspect occupying tokens `start..=end` of its sentence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct AspectSpan {
    pub start: usize,
    pub end: usize,
    pub polarity: Polarity,
}

impl AspectSpan {
    pub fn new(start: usize, end: usize, polarity: Polarity) -> Self {
        AspectSpan { start, end, polarity }
    }

    pub fn len(&self) -> usize {
        self.end + 1 - self.start
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn overlaps(&self, other: &AspectSpan) -> bool {
        self.start <= other.end && other.start <= self.end
    }

    pub fn contains(&self, token: usize) -> bool {
        self.start <= token && token <= self.end
    }

    /// Token distance from `token` to the span; zero inside it.
    pub fn distance(&self, token: usize) -> usize {
        if token > self.end {
            token - self.end
        } else {
            self.start.saturating_sub(token)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ExampleError {
    #[error("token {0} is empty")]
    EmptyToken(usize),
    #[error("token {0} contains whitespace")]
    WhitespaceInToken(usize),
    #[error("token {0} contains a reserved marker")]
    ReservedMarker(usize),
    #[error("span [{start},{end}] is inverted")]
    InvertedSpan { start: usize, end: usize },
    #[error("span [{start},{end}] exceeds {len} tokens")]
    SpanOutOfBounds { start: usize, end: usize, len: usize },
    #[error("spans [{0},{1}] and [{2},{3}] overlap")]
    OverlappingSpans(usize, usize, usize, usize),
}

/// Check a single token against the whitespace tokenization rules.
pub fn check_token(index: usize, token: &str) -> Result<(), ExampleError> {
    if token.is_empty() {
        return Err(ExampleError::EmptyToken(index));
    }
    if token.chars().any(char::is_whitespace) {
        return Err(ExampleError::WhitespaceInToken(index));
    }
    if RESERVED.iter().any(|m| token.contains(m)) {
        return Err(ExampleError::ReservedMarker(index));
    }
    Ok(())
}

/// One tokenized sentence with its annotated aspects.
///
/// Construction through [`AbsaExample::new`] guarantees that tokens obey the
/// whitespace tokenization rules, that spans are in bounds and pairwise
/// disjoint, and that spans are sorted by start token.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AbsaExample {
    tokens: Vec<String>,
    spans: Vec<AspectSpan>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_id: Option<String>,
}

impl AbsaExample {
    pub fn new(tokens: Vec<String>, mut spans: Vec<AspectSpan>) -> Result<Self, ExampleError> {
        for (i, tok) in tokens.iter().enumerate() {
            check_token(i, tok)?;
        }
        spans.sort();
        for span in &spans {
            if span.start > span.end {
                return Err(ExampleError::InvertedSpan { start: span.start, end: span.end });
            }
            if span.end >= tokens.len() {
                return Err(ExampleError::SpanOutOfBounds {
                    start: span.start,
                    end: span.end,
                    len: tokens.len(),
                });
            }
        }
        for pair in spans.windows(2) {
            if pair[0].overlaps(&pair[1]) {
                return Err(ExampleError::OverlappingSpans(
                    pair[0].start,
                    pair[0].end,
                    pair[1].start,
                    pair[1].end,
                ));
            }
        }
        Ok(AbsaExample { tokens, spans, source_id: None })
    }

    /// Whitespace-tokenize `text` into an example without aspects.
    pub fn from_text(text: &str) -> Result<Self, ExampleError> {
        Self::new(text.split_whitespace().map(str::to_string).collect(), Vec::new())
    }

    pub fn with_source(mut self, source_id: impl Into<String>) -> Self {
        self.source_id = Some(source_id.into());
        self
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn spans(&self) -> &[AspectSpan] {
        &self.spans
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn text(&self) -> String {
        self.tokens.join(" ")
    }

    pub fn aspect_text(&self, span: &AspectSpan) -> String {
        self.tokens[span.start..=span.end].join(" ")
    }

    /// Copy of this example with the given spans instead of the current ones.
    pub fn with_spans(&self, spans: Vec<AspectSpan>) -> Result<Self, ExampleError> {
        let mut out = Self::new(self.tokens.clone(), spans)?;
        out.source_id = self.source_id.clone();
        Ok(out)
    }
}

/// A single-aspect ASC record: sentence template, aspect string, polarity.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AscTriple {
    pub template: String,
    pub aspect: String,
    pub polarity: Polarity,
}

impl AscTriple {
    /// The sentence with the aspect substituted for the placeholder.
    pub fn sentence(&self) -> String {
        self.template.replacen(PLACEHOLDER, &self.aspect, 1)
    }
}

/// The three on-disk encodings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EncodingKind {
    /// Three-line groups: template, aspect, polarity.
    AscTriples,
    /// One `token tag polarity` line per token, blank line between sentences.
    AtescColumns,
    /// One sentence per line with inline `[B-ASP]...[E-ASP]` regions.
    SpanTagInline,
}

impl EncodingKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EncodingKind::AscTriples => "asc",
            EncodingKind::AtescColumns => "atesc",
            EncodingKind::SpanTagInline => "spantag",
        }
    }
}

impl fmt::Display for EncodingKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EncodingKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "asc" | "apc" | "triples" => Ok(EncodingKind::AscTriples),
            "atesc" | "atepc" | "columns" | "iob" => Ok(EncodingKind::AtescColumns),
            "spantag" | "inline" => Ok(EncodingKind::SpanTagInline),
            other => Err(format!("unknown encoding `{other}` (expected asc, atesc or spantag)")),
        }
    }
}

/// A parsed corpus in either record shape.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Corpus {
    Triples(Vec<AscTriple>),
    Examples(Vec<AbsaExample>),
}

impl Corpus {
    pub fn len(&self) -> usize {
        match self {
            Corpus::Triples(t) => t.len(),
            Corpus::Examples(e) => e.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn span_count(&self) -> usize {
        match self {
            Corpus::Triples(t) => t.len(),
            Corpus::Examples(e) => e.iter().map(|x| x.spans().len()).sum(),
        }
    }

    /// Every (aspect string, polarity) pair in the corpus.
    pub fn aspect_pairs(&self) -> Vec<(String, Polarity)> {
        match self {
            Corpus::Triples(t) => t.iter().map(|t| (t.aspect.clone(), t.polarity)).collect(),
            Corpus::Examples(e) => e
                .iter()
                .flat_map(|x| x.spans().iter().map(move |s| (x.aspect_text(s), s.polarity)))
                .collect(),
        }
    }

    /// Append `other`, converting it to this corpus' record shape if needed.
    pub fn extend(&mut self, other: Corpus) -> Result<(), super::CorpusError> {
        match (self, other) {
            (Corpus::Triples(a), Corpus::Triples(b)) => a.extend(b),
            (Corpus::Examples(a), Corpus::Examples(b)) => a.extend(b),
            (Corpus::Triples(a), Corpus::Examples(b)) => a.extend(super::examples_to_triples(&b)),
            (Corpus::Examples(a), Corpus::Triples(b)) => a.extend(super::triples_to_examples(&b)?),
        }
        Ok(())
    }

    pub fn into_examples(self) -> Result<Vec<AbsaExample>, super::CorpusError> {
        match self {
            Corpus::Triples(t) => super::triples_to_examples(&t),
            Corpus::Examples(e) => Ok(e),
        }
    }

    pub fn into_triples(self) -> Vec<AscTriple> {
        match self {
            Corpus::Triples(t) => t,
            Corpus::Examples(e) => super::examples_to_triples(&e),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    #[test]
    fn polarity_parse_is_case_insensitive() {
        assert_eq!("POSITIVE".parse::<Polarity>().unwrap(), Polarity::Positive);
        assert_eq!("neutral".parse::<Polarity>().unwrap(), Polarity::Neutral);
        assert!("mixed".parse::<Polarity>().is_err());
        assert_eq!(Polarity::Negative.to_string(), "Negative");
    }

    #[test]
    fn spans_are_sorted_on_construction() {
        let ex = AbsaExample::new(
            toks("a b c d"),
            vec![AspectSpan::new(3, 3, Polarity::Neutral), AspectSpan::new(0, 1, Polarity::Positive)],
        )
        .unwrap();
        assert_eq!(ex.spans()[0].start, 0);
        assert_eq!(ex.aspect_text(&ex.spans()[0]), "a b");
    }

    #[test]
    fn invalid_examples_are_rejected() {
        let overlap = AbsaExample::new(
            toks("a b c"),
            vec![AspectSpan::new(0, 1, Polarity::Positive), AspectSpan::new(1, 2, Polarity::Positive)],
        );
        assert!(matches!(overlap, Err(ExampleError::OverlappingSpans(..))));
        let oob = AbsaExample::new(toks("a"), vec![AspectSpan::new(0, 1, Polarity::Positive)]);
        assert!(matches!(oob, Err(ExampleError::SpanOutOfBounds { .. })));
        let inverted = AbsaExample::new(toks("a b"), vec![AspectSpan::new(1, 0, Polarity::Positive)]);
        assert!(matches!(inverted, Err(ExampleError::InvertedSpan { .. })));
        assert!(matches!(
            AbsaExample::new(vec!["x$T$".into()], vec![]),
            Err(ExampleError::ReservedMarker(0))
        ));
        assert!(matches!(AbsaExample::new(vec!["".into()], vec![]), Err(ExampleError::EmptyToken(0))));
    }

    #[test]
    fn span_distance() {
        let s = AspectSpan::new(2, 3, Polarity::Neutral);
        assert_eq!(s.distance(0), 2);
        assert_eq!(s.distance(3), 0);
        assert_eq!(s.distance(6), 3);
    }
}
