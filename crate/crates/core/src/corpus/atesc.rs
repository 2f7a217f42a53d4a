use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{document_lines, AbsaExample, AspectSpan, CorpusError, Polarity};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum IobTag {
    O,
    Begin,
    Inside,
}

impl IobTag {
    pub const ALL: [IobTag; 3] = [IobTag::O, IobTag::Begin, IobTag::Inside];

    pub fn index(self) -> usize {
        match self {
            IobTag::O => 0,
            IobTag::Begin => 1,
            IobTag::Inside => 2,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            IobTag::O => "O",
            IobTag::Begin => "B-ASP",
            IobTag::Inside => "I-ASP",
        }
    }

    /// Whether `next` may follow `self` (`None` is the sentence start).
    pub fn allows(prev: Option<IobTag>, next: IobTag) -> bool {
        !(next == IobTag::Inside && matches!(prev, None | Some(IobTag::O)))
    }

    /// Tag sequence encoding the spans of an example.
    pub fn encode(example: &AbsaExample) -> Vec<IobTag> {
        let mut tags = vec![IobTag::O; example.len()];
        for span in example.spans() {
            tags[span.start] = IobTag::Begin;
            for t in &mut tags[span.start + 1..=span.end] {
                *t = IobTag::Inside;
            }
        }
        tags
    }

    /// Spans described by a tag sequence. Orphan `I-ASP` tags start a span so
    /// that decoding never loses tokens.
    pub fn decode(tags: &[IobTag]) -> Vec<(usize, usize)> {
        let mut spans = Vec::new();
        let mut open: Option<usize> = None;
        for (i, tag) in tags.iter().enumerate() {
            match tag {
                IobTag::O => {
                    if let Some(s) = open.take() {
                        spans.push((s, i - 1));
                    }
                }
                IobTag::Begin => {
                    if let Some(s) = open.replace(i) {
                        spans.push((s, i - 1));
                    }
                }
                IobTag::Inside => {
                    open.get_or_insert(i);
                }
            }
        }
        if let Some(s) = open {
            spans.push((s, tags.len() - 1));
        }
        spans
    }
}

impl fmt::Display for IobTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for IobTag {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "O" => Ok(IobTag::O),
            "B-ASP" => Ok(IobTag::Begin),
            "I-ASP" => Ok(IobTag::Inside),
            other => Err(other.to_string()),
        }
    }
}

struct Row<'a> {
    line: usize,
    token: &'a str,
    tag: IobTag,
    polarity: Option<Polarity>,
}

fn parse_row(line_no: usize, line: &str) -> Result<Row<'_>, CorpusError> {
    let cols: Vec<&str> = line.split_whitespace().collect();
    if cols.len() != 3 {
        return Err(CorpusError::Column {
            line: line_no,
            message: format!("expected 3 columns, found {}", cols.len()),
        });
    }
    let tag: IobTag = cols[1].parse().map_err(|tag| CorpusError::Tag { line: line_no, tag })?;
    let polarity = match cols[2] {
        "-" => None,
        p => Some(p.parse::<Polarity>().map_err(|e| CorpusError::Column {
            line: line_no,
            message: e.to_string(),
        })?),
    };
    match (tag, polarity) {
        (IobTag::O, Some(_)) => Err(CorpusError::Column {
            line: line_no,
            message: "polarity on an O token".into(),
        }),
        (IobTag::Begin, None) => Err(CorpusError::Column {
            line: line_no,
            message: "missing polarity on B-ASP token".into(),
        }),
        _ => Ok(Row { line: line_no, token: cols[0], tag, polarity }),
    }
}

fn build_sentence(rows: &[Row<'_>]) -> Result<AbsaExample, CorpusError> {
    let mut spans: Vec<AspectSpan> = Vec::new();
    let mut prev: Option<IobTag> = None;
    for (i, row) in rows.iter().enumerate() {
        match row.tag {
            IobTag::O => {}
            IobTag::Begin => {
                let polarity = row.polarity.expect("checked in parse_row");
                spans.push(AspectSpan::new(i, i, polarity));
            }
            IobTag::Inside => {
                if !IobTag::allows(prev, IobTag::Inside) {
                    return Err(CorpusError::Sequence { line: row.line });
                }
                let open = spans.last_mut().expect("I-ASP follows an open span");
                if let Some(p) = row.polarity {
                    if p != open.polarity {
                        return Err(CorpusError::Column {
                            line: row.line,
                            message: format!("polarity {p} differs from its aspect's {}", open.polarity),
                        });
                    }
                }
                open.end = i;
            }
        }
        prev = Some(row.tag);
    }
    let tokens = rows.iter().map(|r| r.token.to_string()).collect();
    AbsaExample::new(tokens, spans).map_err(|source| CorpusError::Example { line: rows[0].line, source })
}

/// Parse every sentence, collecting valid examples and all errors.
/// A sentence containing an error is dropped as a whole.
pub(crate) fn scan_atesc(text: &str) -> (Vec<AbsaExample>, Vec<CorpusError>) {
    let mut examples = Vec::new();
    let mut errors = Vec::new();
    let mut rows: Vec<Row<'_>> = Vec::new();
    let mut broken = false;

    let flush = |rows: &mut Vec<Row<'_>>, broken: &mut bool, examples: &mut Vec<_>, errors: &mut Vec<_>| {
        if !rows.is_empty() && !*broken {
            match build_sentence(rows) {
                Ok(ex) => examples.push(ex),
                Err(e) => errors.push(e),
            }
        }
        rows.clear();
        *broken = false;
    };

    for (idx, line) in document_lines(text).into_iter().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            flush(&mut rows, &mut broken, &mut examples, &mut errors);
            continue;
        }
        match parse_row(line_no, line) {
            Ok(row) => rows.push(row),
            Err(e) => {
                errors.push(e);
                broken = true;
            }
        }
    }
    flush(&mut rows, &mut broken, &mut examples, &mut errors);
    (examples, errors)
}

/// Parse an ATESC column document.
pub fn parse_atesc(text: &str) -> Result<Vec<AbsaExample>, CorpusError> {
    let (examples, mut errors) = scan_atesc(text);
    if errors.is_empty() {
        Ok(examples)
    } else {
        Err(errors.swap_remove(0))
    }
}

/// Serialize examples into the ATESC column encoding.
///
/// Every sentence is terminated by a blank line. `I-ASP` rows repeat the
/// polarity of their aspect. Examples without tokens cannot be represented
/// and are skipped.
pub fn serialize_atesc(examples: &[AbsaExample]) -> String {
    let mut out = String::new();
    for ex in examples.iter().filter(|e| !e.is_empty()) {
        let tags = IobTag::encode(ex);
        let mut spans = ex.spans().iter().peekable();
        for (i, (token, tag)) in ex.tokens().iter().zip(&tags).enumerate() {
            while spans.peek().is_some_and(|s| s.end < i) {
                spans.next();
            }
            let polarity = match tag {
                IobTag::O => "-",
                _ => spans.peek().map(|s| s.polarity.as_str()).unwrap_or("-"),
            };
            out.push_str(token);
            out.push(' ');
            out.push_str(tag.as_str());
            out.push(' ');
            out.push_str(polarity);
            out.push('\n');
        }
        out.push('\n');
    }
    out
}
