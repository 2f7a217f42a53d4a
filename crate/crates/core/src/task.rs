use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Trainable task family.
///
/// ATE is served by ATESC models, so datasets and configurations only
/// distinguish the two.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TaskKind {
    #[serde(rename = "ASC")]
    Asc,
    #[serde(rename = "ATESC")]
    Atesc,
}

impl TaskKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TaskKind::Asc => "ASC",
            TaskKind::Atesc => "ATESC",
        }
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown task `{0}` (expected ASC or ATESC)")]
pub struct ParseTaskError(pub String);

impl FromStr for TaskKind {
    type Err = ParseTaskError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "ASC" | "APC" => Ok(TaskKind::Asc),
            "ATESC" | "ATEPC" | "E2EABSA" => Ok(TaskKind::Atesc),
            _ => Err(ParseTaskError(s.to_string())),
        }
    }
}
