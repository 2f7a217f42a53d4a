use super::{document_lines, AscTriple, CorpusError, Polarity, PLACEHOLDER};

fn group_lines(text: &str) -> Vec<&str> {
    let mut lines = document_lines(text);
    while lines.last().is_some_and(|l| l.trim().is_empty()) {
        lines.pop();
    }
    lines
}

fn parse_group(group: usize, first_line: usize, lines: &[&str]) -> Result<AscTriple, CorpusError> {
    let template = lines[0];
    let found = template.matches(PLACEHOLDER).count();
    if found != 1 {
        return Err(CorpusError::Placeholder { group, line: first_line, found });
    }
    let aspect = lines[1];
    if aspect.trim().is_empty() {
        return Err(CorpusError::EmptyAspect { line: first_line + 1 });
    }
    let polarity: Polarity = lines[2].trim().parse().map_err(|_| CorpusError::Polarity {
        group,
        line: first_line + 2,
        value: lines[2].to_string(),
    })?;
    let triple = AscTriple { template: template.to_string(), aspect: aspect.to_string(), polarity };
    // the substituted sentence must be representable as an example
    super::convert::triple_to_example(&triple).map_err(|e| e.at_line(first_line))?;
    Ok(triple)
}

pub(crate) fn scan_asc(text: &str) -> (Vec<AscTriple>, Vec<CorpusError>) {
    let lines = group_lines(text);
    let mut triples = Vec::new();
    let mut errors = Vec::new();
    if !lines.len().is_multiple_of(3) {
        errors.push(CorpusError::Framing { lines: lines.len() });
    }
    for (g, chunk) in lines.chunks_exact(3).enumerate() {
        match parse_group(g + 1, g * 3 + 1, chunk) {
            Ok(t) => triples.push(t),
            Err(e) => errors.push(e),
        }
    }
    (triples, errors)
}

/// Parse an ASC triple document. Group numbers in errors are 1-based.
pub fn parse_asc_triples(text: &str) -> Result<Vec<AscTriple>, CorpusError> {
    let lines = group_lines(text);
    if !lines.len().is_multiple_of(3) {
        return Err(CorpusError::Framing { lines: lines.len() });
    }
    lines
        .chunks_exact(3)
        .enumerate()
        .map(|(g, chunk)| parse_group(g + 1, g * 3 + 1, chunk))
        .collect()
}

pub fn serialize_asc_triples(triples: &[AscTriple]) -> String {
    let mut out = String::new();
    for t in triples {
        out.push_str(&t.template);
        out.push('\n');
        out.push_str(&t.aspect);
        out.push('\n');
        out.push_str(t.polarity.as_str());
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const PIZZA: &str = "I love the $T$ at this restaurant , but the service is terrible .\npizza\nPositive\n";

    #[test]
    fn parses_the_pizza_triple() {
        let t = parse_asc_triples(PIZZA).unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(t[0].aspect, "pizza");
        assert_eq!(t[0].polarity, Polarity::Positive);
        assert_eq!(serialize_asc_triples(&t), PIZZA);
    }

    #[test]
    fn empty_document() {
        assert!(parse_asc_triples("").unwrap().is_empty());
        assert!(parse_asc_triples("\n\n").unwrap().is_empty());
    }

    #[test]
    fn framing_and_placeholder_errors() {
        assert_eq!(parse_asc_triples("a $T$\nb\n").unwrap_err(), CorpusError::Framing { lines: 2 });
        assert_eq!(
            parse_asc_triples("$T$ and $T$\nx\nPositive\n").unwrap_err(),
            CorpusError::Placeholder { group: 1, line: 1, found: 2 }
        );
        assert_eq!(
            parse_asc_triples("ok $T$\nx\nPositive\nno placeholder\nx\nNegative\n").unwrap_err(),
            CorpusError::Placeholder { group: 2, line: 4, found: 0 }
        );
        assert!(matches!(
            parse_asc_triples("a $T$\nx\ngreat\n"),
            Err(CorpusError::Polarity { group: 1, line: 3, .. })
        ));
        assert!(matches!(parse_asc_triples("a $T$\n  \nPositive\n"), Err(CorpusError::EmptyAspect { line: 2 })));
    }
}
