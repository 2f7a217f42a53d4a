//! Canonical in-memory ABSA records and the three on-disk encodings.
//!
//! * ASC triples: groups of three lines (template with `$T$`, aspect,
//!   polarity).
//! * ATESC columns: `<token> <tag> <polarity-or-dash>` per line, tags
//!   `O`/`B-ASP`/`I-ASP`, blank line between sentences.
//! * Span tags: one sentence per line, aspects wrapped in
//!   `[B-ASP]...[E-ASP]` with an optional `$LABEL$<polarity>` suffix.
//!
//! Tokenization is whitespace-based everywhere. Input may use CRLF line
//! endings; output always uses LF. Line numbers in errors are 1-based.

mod asc;
mod atesc;
mod convert;
mod spantag;
mod types;
mod validate;

pub use asc::{parse_asc_triples, serialize_asc_triples};
pub use atesc::{parse_atesc, serialize_atesc, IobTag};
pub use convert::{convert, examples_to_triples, triples_to_examples};
pub(crate) use convert::triple_to_example;
pub use spantag::{parse_spantag, parse_spantag_document, serialize_spantag, serialize_spantag_document};
pub use types::*;
pub use validate::{validate, validate_bytes, Diagnostic, DiagnosticCode, ValidationReport};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CorpusError {
    #[error("line {line}: I-ASP does not continue an aspect")]
    Sequence { line: usize },
    #[error("line {line}: {message}")]
    Column { line: usize, message: String },
    #[error("line {line}: unknown tag `{tag}`")]
    Tag { line: usize, tag: String },
    #[error("{lines} non-blank lines do not form whole 3-line groups")]
    Framing { lines: usize },
    #[error("group {group} (line {line}): template must contain `$T$` exactly once, found {found}")]
    Placeholder { group: usize, line: usize, found: usize },
    #[error("group {group} (line {line}): invalid polarity `{value}`")]
    Polarity { group: usize, line: usize, value: String },
    #[error("line {line}, byte {column}: {message}")]
    TagBalance { line: usize, column: usize, message: &'static str },
    #[error("line {line}: invalid label `{value}`")]
    Label { line: usize, value: String },
    #[error("line {line}: aspect is empty")]
    EmptyAspect { line: usize },
    #[error("line {line}: {source}")]
    Example {
        line: usize,
        #[source]
        source: ExampleError,
    },
    #[error("invalid UTF-8 at byte {offset}")]
    Utf8 { offset: usize },
}

impl CorpusError {
    pub fn line(&self) -> Option<usize> {
        match self {
            CorpusError::Sequence { line }
            | CorpusError::Column { line, .. }
            | CorpusError::Tag { line, .. }
            | CorpusError::Placeholder { line, .. }
            | CorpusError::Polarity { line, .. }
            | CorpusError::TagBalance { line, .. }
            | CorpusError::Label { line, .. }
            | CorpusError::EmptyAspect { line }
            | CorpusError::Example { line, .. } => Some(*line),
            CorpusError::Framing { .. } | CorpusError::Utf8 { .. } => None,
        }
    }

    pub fn code(&self) -> DiagnosticCode {
        match self {
            CorpusError::Sequence { .. } => DiagnosticCode::SequenceError,
            CorpusError::Column { .. } => DiagnosticCode::ColumnError,
            CorpusError::Tag { .. } => DiagnosticCode::TagError,
            CorpusError::Framing { .. } => DiagnosticCode::FramingError,
            CorpusError::Placeholder { .. } => DiagnosticCode::PlaceholderError,
            CorpusError::Polarity { .. } | CorpusError::Label { .. } => DiagnosticCode::PolarityError,
            CorpusError::TagBalance { .. } => DiagnosticCode::TagBalanceError,
            CorpusError::EmptyAspect { .. } => DiagnosticCode::EmptyAspect,
            CorpusError::Example { .. } => DiagnosticCode::InvalidExample,
            CorpusError::Utf8 { .. } => DiagnosticCode::EncodingError,
        }
    }

    pub(crate) fn at_line(self, new_line: usize) -> Self {
        match self {
            CorpusError::TagBalance { column, message, .. } => {
                CorpusError::TagBalance { line: new_line, column, message }
            }
            CorpusError::Label { value, .. } => CorpusError::Label { line: new_line, value },
            CorpusError::EmptyAspect { .. } => CorpusError::EmptyAspect { line: new_line },
            CorpusError::Example { source, .. } => CorpusError::Example { line: new_line, source },
            other => other,
        }
    }
}

/// Split a document into lines, dropping the terminator of the last line
/// and any trailing `\r`.
pub(crate) fn document_lines(text: &str) -> Vec<&str> {
    if text.is_empty() {
        return Vec::new();
    }
    let body = text.strip_suffix('\n').unwrap_or(text);
    body.split('\n').map(|l| l.strip_suffix('\r').unwrap_or(l)).collect()
}

/// Parse a document of the given encoding.
pub fn parse(text: &str, kind: EncodingKind) -> Result<Corpus, CorpusError> {
    Ok(match kind {
        EncodingKind::AscTriples => Corpus::Triples(parse_asc_triples(text)?),
        EncodingKind::AtescColumns => Corpus::Examples(parse_atesc(text)?),
        EncodingKind::SpanTagInline => Corpus::Examples(parse_spantag_document(text)?),
    })
}

/// Parse raw bytes, reporting invalid UTF-8 instead of failing hard.
pub fn parse_bytes(bytes: &[u8], kind: EncodingKind) -> Result<Corpus, CorpusError> {
    let text = std::str::from_utf8(bytes).map_err(|e| CorpusError::Utf8 { offset: e.valid_up_to() })?;
    parse(text, kind)
}

/// Serialize a corpus into the given encoding, converting record shapes
/// when the encoding and the corpus disagree.
pub fn serialize(corpus: &Corpus, kind: EncodingKind) -> Result<String, CorpusError> {
    Ok(match (corpus, kind) {
        (Corpus::Triples(t), EncodingKind::AscTriples) => serialize_asc_triples(t),
        (Corpus::Examples(e), EncodingKind::AscTriples) => serialize_asc_triples(&examples_to_triples(e)),
        (Corpus::Examples(e), EncodingKind::AtescColumns) => serialize_atesc(e),
        (Corpus::Examples(e), EncodingKind::SpanTagInline) => serialize_spantag_document(e),
        (Corpus::Triples(t), EncodingKind::AtescColumns) => serialize_atesc(&triples_to_examples(t)?),
        (Corpus::Triples(t), EncodingKind::SpanTagInline) => {
            serialize_spantag_document(&triples_to_examples(t)?)
        }
    })
}

/// Byte ranges of the whitespace-separated tokens of `text`.
pub(crate) fn token_ranges(text: &str) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, c) in text.char_indices() {
        if c.is_whitespace() {
            if let Some(s) = start.take() {
                out.push((s, i));
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        out.push((s, text.len()));
    }
    out
}

/// Tokens of `text` plus, per byte region, the inclusive range of tokens it
/// touches (`None` when the region covers no token).
pub(crate) fn tokenize_regions(
    text: &str,
    regions: &[(usize, usize)],
) -> (Vec<String>, Vec<Option<(usize, usize)>>) {
    let ranges = token_ranges(text);
    let tokens = ranges.iter().map(|&(s, e)| text[s..e].to_string()).collect();
    let hits = regions
        .iter()
        .map(|&(rs, re)| {
            if rs >= re {
                return None;
            }
            let mut touched = ranges
                .iter()
                .enumerate()
                .filter(|(_, &(ts, te))| ts < re && te > rs)
                .map(|(i, _)| i);
            let first = touched.next()?;
            let last = touched.next_back().unwrap_or(first);
            Some((first, last))
        })
        .collect();
    (tokens, hits)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn regions_map_to_touched_tokens() {
        let text = "The food, was good";
        let (tokens, hits) = tokenize_regions(text, &[(4, 8), (11, 11), (0, 18)]);
        assert_eq!(tokens, vec!["The", "food,", "was", "good"]);
        assert_eq!(hits, vec![Some((1, 1)), None, Some((0, 3))]);
    }

    #[test]
    fn document_lines_handles_crlf_and_trailing_newline() {
        assert_eq!(document_lines("a\r\nb\r\n"), vec!["a", "b"]);
        assert_eq!(document_lines("a\n\nb"), vec!["a", "", "b"]);
        assert!(document_lines("").is_empty());
    }

    #[test]
    fn invalid_utf8_is_an_error_not_a_panic() {
        let err = parse_bytes(&[b'a', 0xff, b'\n'], EncodingKind::AtescColumns).unwrap_err();
        assert_eq!(err, CorpusError::Utf8 { offset: 1 });
    }
}
