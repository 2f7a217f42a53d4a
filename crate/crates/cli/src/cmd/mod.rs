pub mod annotate;
pub mod augment;
pub mod checkpoints;
pub mod corpus;
pub mod datasets;
pub mod infer;
pub mod report;
pub mod train;

use std::fs;
use std::path::Path;

use crate::error::{CliError, Result};

pub(crate) fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

/// Split repeated and comma-separated values into one list.
pub(crate) fn flatten_list(values: &[String]) -> Vec<String> {
    values
        .iter()
        .flat_map(|v| v.split(','))
        .map(str::trim)
        .filter(|v| !v.is_empty())
        .map(str::to_string)
        .collect()
}
