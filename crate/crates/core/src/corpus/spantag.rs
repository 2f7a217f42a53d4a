use super::{
    document_lines, tokenize_regions, AbsaExample, AspectSpan, CorpusError, Polarity, BEGIN_TAG, END_TAG,
    LABEL_PREFIX,
};

struct Region {
    start: usize,
    end: usize,
    polarity: Polarity,
}

/// Parse one span-tagged sentence such as `The [B-ASP]food[E-ASP] was good!`.
///
/// Regions without a `$LABEL$` suffix get [`Polarity::Neutral`]. A region
/// covers every token it touches after the tags are removed.
pub fn parse_spantag(line: &str) -> Result<AbsaExample, CorpusError> {
    let balance = |column, message| CorpusError::TagBalance { line: 1, column, message };
    let mut stripped = String::with_capacity(line.len());
    let mut regions: Vec<Region> = Vec::new();
    let mut open: Option<usize> = None;
    let mut rest = line;

    while !rest.is_empty() {
        let column = line.len() - rest.len();
        if let Some(after) = rest.strip_prefix(BEGIN_TAG) {
            if open.is_some() {
                return Err(balance(column, "nested [B-ASP]"));
            }
            open = Some(stripped.len());
            rest = after;
        } else if let Some(after) = rest.strip_prefix(END_TAG) {
            let start = open.take().ok_or_else(|| balance(column, "[E-ASP] without [B-ASP]"))?;
            rest = after;
            let mut polarity = Polarity::Neutral;
            if let Some(after) = rest.strip_prefix(LABEL_PREFIX) {
                let word_len = after.find(|c: char| !c.is_alphabetic()).unwrap_or(after.len());
                let word = &after[..word_len];
                polarity = word
                    .parse()
                    .map_err(|_| CorpusError::Label { line: 1, value: word.to_string() })?;
                rest = &after[word_len..];
            }
            regions.push(Region { start, end: stripped.len(), polarity });
        } else if rest.starts_with(LABEL_PREFIX) {
            return Err(balance(column, "$LABEL$ outside an aspect"));
        } else {
            let c = rest.chars().next().expect("nonempty");
            stripped.push(c);
            rest = &rest[c.len_utf8()..];
        }
    }
    if open.is_some() {
        return Err(balance(line.len(), "unclosed [B-ASP]"));
    }

    let bounds: Vec<(usize, usize)> = regions.iter().map(|r| (r.start, r.end)).collect();
    let (tokens, hits) = tokenize_regions(&stripped, &bounds);
    let mut spans = Vec::with_capacity(regions.len());
    for (region, hit) in regions.iter().zip(hits) {
        let (start, end) = hit.ok_or(CorpusError::EmptyAspect { line: 1 })?;
        spans.push(AspectSpan::new(start, end, region.polarity));
    }
    AbsaExample::new(tokens, spans).map_err(|source| CorpusError::Example { line: 1, source })
}

/// Render one example with inline tags; every region carries its label.
pub fn serialize_spantag(example: &AbsaExample) -> String {
    let mut out = String::new();
    let mut spans = example.spans().iter().peekable();
    for (i, token) in example.tokens().iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        let span = spans.peek().copied().filter(|s| s.contains(i));
        if span.is_some_and(|s| s.start == i) {
            out.push_str(BEGIN_TAG);
        }
        out.push_str(token);
        if let Some(s) = span.filter(|s| s.end == i) {
            out.push_str(END_TAG);
            out.push_str(LABEL_PREFIX);
            out.push_str(s.polarity.as_str());
            spans.next();
        }
    }
    out
}

pub(crate) fn scan_spantag(text: &str) -> (Vec<AbsaExample>, Vec<CorpusError>) {
    let mut examples = Vec::new();
    let mut errors = Vec::new();
    for (i, line) in document_lines(text).into_iter().enumerate() {
        match parse_spantag(line) {
            Ok(ex) => examples.push(ex),
            Err(e) => errors.push(e.at_line(i + 1)),
        }
    }
    (examples, errors)
}

/// Parse a span-tag document: one example per line.
pub fn parse_spantag_document(text: &str) -> Result<Vec<AbsaExample>, CorpusError> {
    document_lines(text)
        .into_iter()
        .enumerate()
        .map(|(i, line)| parse_spantag(line).map_err(|e| e.at_line(i + 1)))
        .collect()
}

pub fn serialize_spantag_document(examples: &[AbsaExample]) -> String {
    let mut out = String::new();
    for ex in examples {
        out.push_str(&serialize_spantag(ex));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_the_food_line() {
        let ex = parse_spantag("The [B-ASP]food[E-ASP] was good!").unwrap();
        assert_eq!(ex.tokens(), ["The", "food", "was", "good!"]);
        assert_eq!(ex.spans(), [AspectSpan::new(1, 1, Polarity::Neutral)]);
    }

    #[test]
    fn untagged_line_has_no_spans() {
        let ex = parse_spantag("But the staff was so nice to us .").unwrap();
        assert_eq!(ex.len(), 9);
        assert!(ex.spans().is_empty());
    }

    #[test]
    fn labels_and_multi_token_regions() {
        let ex = parse_spantag("the [B-ASP]battery life[E-ASP]$LABEL$negative is short").unwrap();
        assert_eq!(ex.spans(), [AspectSpan::new(1, 2, Polarity::Negative)]);
        assert_eq!(serialize_spantag(&ex), "the [B-ASP]battery life[E-ASP]$LABEL$Negative is short");
    }

    #[test]
    fn nesting_and_imbalance_are_rejected() {
        for bad in ["[B-ASP]a [B-ASP]b[E-ASP][E-ASP]", "a[E-ASP]", "[B-ASP]a", "a $LABEL$Positive"] {
            assert!(
                matches!(parse_spantag(bad), Err(CorpusError::TagBalance { .. })),
                "{bad}"
            );
        }
        assert!(matches!(parse_spantag("[B-ASP] [E-ASP] x"), Err(CorpusError::EmptyAspect { .. })));
        assert!(matches!(parse_spantag("[B-ASP]x[E-ASP]$LABEL$great"), Err(CorpusError::Label { .. })));
        // two regions inside one token overlap
        assert!(matches!(
            parse_spantag("[B-ASP]a[E-ASP][B-ASP]b[E-ASP]"),
            Err(CorpusError::Example { .. })
        ));
    }

    #[test]
    fn document_errors_carry_line_numbers() {
        let err = parse_spantag_document("ok\n[B-ASP]x\n").unwrap_err();
        assert!(matches!(err, CorpusError::TagBalance { line: 2, .. }));
    }
}
