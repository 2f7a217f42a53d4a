use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{asc, atesc, spantag, AbsaExample, AscTriple, CorpusError, EncodingKind, Polarity};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum DiagnosticCode {
    SequenceError,
    ColumnError,
    TagError,
    FramingError,
    PlaceholderError,
    PolarityError,
    TagBalanceError,
    EmptyAspect,
    InvalidExample,
    EncodingError,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    /// 1-based line, absent for document-level problems.
    pub line: Option<usize>,
    pub code: DiagnosticCode,
    pub message: String,
}

impl From<&CorpusError> for Diagnostic {
    fn from(e: &CorpusError) -> Self {
        Diagnostic { line: e.line(), code: e.code(), message: e.to_string() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ValidationReport {
    pub diagnostics: Vec<Diagnostic>,
    /// Sentences (ATESC, span tags) or triples (ASC) that parsed cleanly.
    pub examples: usize,
    pub spans: usize,
    pub polarity: BTreeMap<Polarity, usize>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.diagnostics.is_empty()
    }

    fn count_examples(&mut self, examples: &[AbsaExample]) {
        self.examples += examples.len();
        for span in examples.iter().flat_map(|e| e.spans()) {
            self.spans += 1;
            *self.polarity.entry(span.polarity).or_default() += 1;
        }
    }

    fn count_triples(&mut self, triples: &[AscTriple]) {
        self.examples += triples.len();
        self.spans += triples.len();
        for t in triples {
            *self.polarity.entry(t.polarity).or_default() += 1;
        }
    }

    /// Fold another report (e.g. another file of the same split) into this one.
    pub fn merge(&mut self, other: ValidationReport) {
        self.diagnostics.extend(other.diagnostics);
        self.examples += other.examples;
        self.spans += other.spans;
        for (p, n) in other.polarity {
            *self.polarity.entry(p).or_default() += n;
        }
    }
}

/// Check a whole document, reporting every problem instead of stopping at
/// the first. Records that fail are excluded from the counts.
pub fn validate(document: &str, kind: EncodingKind) -> ValidationReport {
    let mut report = ValidationReport::default();
    let errors = match kind {
        EncodingKind::AscTriples => {
            let (triples, errors) = asc::scan_asc(document);
            report.count_triples(&triples);
            errors
        }
        EncodingKind::AtescColumns => {
            let (examples, errors) = atesc::scan_atesc(document);
            report.count_examples(&examples);
            errors
        }
        EncodingKind::SpanTagInline => {
            let (examples, errors) = spantag::scan_spantag(document);
            report.count_examples(&examples);
            errors
        }
    };
    report.diagnostics = errors.iter().map(Diagnostic::from).collect();
    report
}

pub fn validate_bytes(bytes: &[u8], kind: EncodingKind) -> ValidationReport {
    match std::str::from_utf8(bytes) {
        Ok(text) => validate(text, kind),
        Err(e) => ValidationReport {
            diagnostics: vec![Diagnostic::from(&CorpusError::Utf8 { offset: e.valid_up_to() })],
            ..Default::default()
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clean_fixture_counts() {
        let doc = "The O -\nfood B-ASP Positive\n\nthe O -\nservice B-ASP Negative\nand O -\nwine B-ASP Positive\n\n";
        let r = validate(doc, EncodingKind::AtescColumns);
        assert!(r.is_clean());
        assert_eq!(r.examples, 2);
        assert_eq!(r.spans, 3);
        assert_eq!(r.polarity[&Polarity::Positive], 2);
        assert_eq!(r.polarity[&Polarity::Negative], 1);
    }

    #[test]
    fn one_bad_transition_is_one_diagnostic() {
        let doc = "a O -\nb I-ASP Positive\n\nc B-ASP Neutral\n";
        let r = validate(doc, EncodingKind::AtescColumns);
        assert_eq!(r.diagnostics.len(), 1);
        assert_eq!(r.diagnostics[0].code, DiagnosticCode::SequenceError);
        assert_eq!(r.diagnostics[0].line, Some(2));
        assert_eq!(r.examples, 1);
    }

    #[test]
    fn asc_report_keeps_going_after_errors() {
        let doc = "a $T$\nx\nPositive\nnone\ny\nNegative\nb $T$\nz\nNeutral\nextra\n";
        let r = validate(doc, EncodingKind::AscTriples);
        let codes: Vec<_> = r.diagnostics.iter().map(|d| d.code).collect();
        assert_eq!(codes, vec![DiagnosticCode::FramingError, DiagnosticCode::PlaceholderError]);
        assert_eq!(r.examples, 2);
    }

    #[test]
    fn non_utf8_bytes() {
        let r = validate_bytes(&[0xC3, 0x28], EncodingKind::SpanTagInline);
        assert_eq!(r.diagnostics[0].code, DiagnosticCode::EncodingError);
    }
}
