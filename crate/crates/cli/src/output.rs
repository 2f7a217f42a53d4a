//! JSON lines for programs, plain text when stdout is a terminal.

use std::io::{self, IsTerminal, Write};

use serde_json::Value;

pub struct Output {
    human: bool,
    out: io::StdoutLock<'static>,
}

impl Output {
    pub fn new(force_json: bool) -> Self {
        let out = io::stdout().lock();
        Output { human: !force_json && io::stdout().is_terminal(), out }
    }

    pub fn is_human(&self) -> bool {
        self.human
    }

    /// Print `record` as one JSON line, or `text()` on a terminal.
    pub fn emit(&mut self, record: &Value, text: impl FnOnce() -> String) -> io::Result<()> {
        if self.human {
            writeln!(self.out, "{}", text())
        } else {
            writeln!(self.out, "{record}")
        }
    }
}

/// Left-aligned table with a header row.
pub fn table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let line = |cells: Vec<&str>| {
        cells
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c:<w$}"))
            .collect::<Vec<_>>()
            .join("  ")
            .trim_end()
            .to_string()
    };
    let mut out = vec![line(header.to_vec())];
    out.extend(rows.iter().map(|r| line(r.iter().map(String::as_str).collect())));
    out.join("\n")
}
