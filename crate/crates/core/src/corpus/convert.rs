use super::{
    parse, serialize, tokenize_regions, AbsaExample, AscTriple, AspectSpan, CorpusError, EncodingKind,
    PLACEHOLDER,
};

/// One ASC triple per aspect span; the aspect tokens collapse into `$T$`.
pub fn examples_to_triples(examples: &[AbsaExample]) -> Vec<AscTriple> {
    let mut out = Vec::new();
    for ex in examples {
        let tokens = ex.tokens();
        for span in ex.spans() {
            let mut template: Vec<&str> = tokens[..span.start].iter().map(String::as_str).collect();
            template.push(PLACEHOLDER);
            template.extend(tokens[span.end + 1..].iter().map(String::as_str));
            out.push(AscTriple {
                template: template.join(" "),
                aspect: ex.aspect_text(span),
                polarity: span.polarity,
            });
        }
    }
    out
}

/// Rebuild the tokenized sentence of a triple. The `$T$` position decides
/// where the aspect is, even when the aspect string also occurs elsewhere.
pub(crate) fn triple_to_example(triple: &AscTriple) -> Result<AbsaExample, CorpusError> {
    let at = triple
        .template
        .find(PLACEHOLDER)
        .ok_or(CorpusError::Placeholder { group: 1, line: 1, found: 0 })?;
    let mut sentence = String::with_capacity(triple.template.len() + triple.aspect.len());
    sentence.push_str(&triple.template[..at]);
    sentence.push_str(&triple.aspect);
    sentence.push_str(&triple.template[at + PLACEHOLDER.len()..]);
    let region = (at, at + triple.aspect.len());
    let (tokens, hits) = tokenize_regions(&sentence, &[region]);
    let (start, end) = hits[0].ok_or(CorpusError::EmptyAspect { line: 1 })?;
    AbsaExample::new(tokens, vec![AspectSpan::new(start, end, triple.polarity)])
        .map_err(|source| CorpusError::Example { line: 1, source })
}

/// Rebuild ATESC examples from triples.
///
/// Consecutive triples over the same sentence merge into one example as
/// long as their spans do not overlap, so a multi-aspect sentence converted
/// to triples comes back as a single sentence.
pub fn triples_to_examples(triples: &[AscTriple]) -> Result<Vec<AbsaExample>, CorpusError> {
    let mut out: Vec<AbsaExample> = Vec::new();
    for (g, triple) in triples.iter().enumerate() {
        let ex = triple_to_example(triple).map_err(|e| match e {
            CorpusError::Placeholder { found, .. } => CorpusError::Placeholder { group: g + 1, line: g * 3 + 1, found },
            other => other.at_line(g * 3 + 1),
        })?;
        let span = ex.spans()[0];
        if let Some(prev) = out.last_mut() {
            if prev.tokens() == ex.tokens() && !prev.spans().iter().any(|s| s.overlaps(&span)) {
                let mut spans = prev.spans().to_vec();
                spans.push(span);
                *prev = prev.with_spans(spans).expect("disjoint in-bounds spans");
                continue;
            }
        }
        out.push(ex);
    }
    Ok(out)
}

/// Re-encode a document from one encoding into another.
pub fn convert(document: &str, from: EncodingKind, to: EncodingKind) -> Result<String, CorpusError> {
    serialize(&parse(document, from)?, to)
}
