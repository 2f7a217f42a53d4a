//! Run configuration with per-task defaults and a sanity checker.
//!
//! Configurations are plain values. [`RunConfig::set`] returns a modified
//! copy, and [`check`] lists every violated rule instead of failing on the
//! first one. Config files are either flat `key=value` text or a JSON
//! object; unknown keys in files produce warnings, not errors.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::TaskKind;

/// Baseline ASC model ids. `lr-cdw` and `lr-cdm` pin the context mode,
/// `lr-bow` follows the `lcf` setting.
pub const ASC_MODELS: [&str; 3] = ["lr-bow", "lr-cdw", "lr-cdm"];
/// Baseline ATESC model ids.
pub const ATESC_MODELS: [&str; 1] = ["perceptron-iob"];

pub const MAX_SEQ_LEN_RANGE: (usize, usize) = (8, 4096);
pub const EPOCHS_RANGE: (usize, usize) = (1, 1000);

/// Context weighting around the aspect.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LcfMode {
    /// Linear decay with token distance.
    Cdw,
    /// Hard mask outside a window.
    Cdm,
}

impl fmt::Display for LcfMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LcfMode::Cdw => "cdw",
            LcfMode::Cdm => "cdm",
        })
    }
}

impl FromStr for LcfMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "cdw" => Ok(LcfMode::Cdw),
            "cdm" => Ok(LcfMode::Cdm),
            _ => Err(format!("expected cdw or cdm, got `{s}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SaveMode {
    None,
    State,
}

impl fmt::Display for SaveMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SaveMode::None => "none",
            SaveMode::State => "state",
        })
    }
}

impl FromStr for SaveMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "none" | "0" => Ok(SaveMode::None),
            "state" | "1" => Ok(SaveMode::State),
            _ => Err(format!("expected none or state, got `{s}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub task: TaskKind,
    pub model_id: String,
    pub max_seq_len: usize,
    pub epochs: usize,
    pub seeds: Vec<u64>,
    pub lcf: LcfMode,
    pub learning_rate: f64,
    pub l2_reg: f64,
    pub batch_size: usize,
    pub checkpoint_save_mode: SaveMode,
    pub load_aug: bool,
    pub window: usize,
}

/// Every overridable key, in canonical order.
pub const FIELDS: [&str; 12] = [
    "task",
    "model_id",
    "max_seq_len",
    "epochs",
    "seeds",
    "lcf",
    "learning_rate",
    "l2_reg",
    "batch_size",
    "checkpoint_save_mode",
    "load_aug",
    "window",
];

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ConfigError {
    #[error("unknown config field `{0}`")]
    UnknownField(String),
    #[error("cannot parse `{value}` for `{field}`: {reason}")]
    ParseFailure { field: String, value: String, reason: String },
    #[error("invalid config file: {0}")]
    Format(String),
}

/// One violated rule.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfigDiagnostic {
    pub field: String,
    pub rule: String,
    pub value: String,
}

impl fmt::Display for ConfigDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {} (got {})", self.field, self.rule, self.value)
    }
}

impl From<ConfigError> for ConfigDiagnostic {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::UnknownField(field) => {
                ConfigDiagnostic { field, rule: "must be a known field".into(), value: String::new() }
            }
            ConfigError::ParseFailure { field, value, reason } => ConfigDiagnostic { field, rule: reason, value },
            ConfigError::Format(msg) => ConfigDiagnostic { field: String::new(), rule: msg, value: String::new() },
        }
    }
}

/// Complete, valid configuration for a task.
pub fn defaults(task: TaskKind) -> RunConfig {
    RunConfig {
        task,
        model_id: match task {
            TaskKind::Asc => ASC_MODELS[0].to_string(),
            TaskKind::Atesc => ATESC_MODELS[0].to_string(),
        },
        max_seq_len: 80,
        epochs: 10,
        seeds: vec![1],
        lcf: LcfMode::Cdw,
        learning_rate: 0.1,
        l2_reg: 1e-4,
        batch_size: 16,
        checkpoint_save_mode: SaveMode::State,
        load_aug: false,
        window: 3,
    }
}

fn parse_field<T: FromStr>(field: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: fmt::Display,
{
    value.trim().parse::<T>().map_err(|e| ConfigError::ParseFailure {
        field: field.to_string(),
        value: value.to_string(),
        reason: e.to_string(),
    })
}

fn parse_bool(field: &str, value: &str) -> Result<bool, ConfigError> {
    match value.trim().to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(ConfigError::ParseFailure {
            field: field.into(),
            value: value.into(),
            reason: "expected true or false".into(),
        }),
    }
}

fn canonical_key(key: &str) -> Option<&'static str> {
    let key = key.trim().to_ascii_lowercase().replace('-', "_");
    match key.as_str() {
        "model" => Some("model_id"),
        "seed" => Some("seeds"),
        "lr" => Some("learning_rate"),
        k => FIELDS.iter().copied().find(|f| *f == k),
    }
}

impl RunConfig {
    /// Copy of `self` with one field replaced from its string form.
    pub fn set(&self, key: &str, value: &str) -> Result<RunConfig, ConfigError> {
        let field = canonical_key(key).ok_or_else(|| ConfigError::UnknownField(key.to_string()))?;
        let mut out = self.clone();
        match field {
            "task" => out.task = parse_field(field, value)?,
            "model_id" => out.model_id = value.trim().to_string(),
            "max_seq_len" => out.max_seq_len = parse_field(field, value)?,
            "epochs" => out.epochs = parse_field(field, value)?,
            "seeds" => {
                out.seeds = value
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| parse_field::<u64>(field, s))
                    .collect::<Result<_, _>>()?
            }
            "lcf" => out.lcf = parse_field(field, value)?,
            "learning_rate" => out.learning_rate = parse_field(field, value)?,
            "l2_reg" => out.l2_reg = parse_field(field, value)?,
            "batch_size" => out.batch_size = parse_field(field, value)?,
            "checkpoint_save_mode" => out.checkpoint_save_mode = parse_field(field, value)?,
            "load_aug" => out.load_aug = parse_bool(field, value)?,
            "window" => out.window = parse_field(field, value)?,
            _ => unreachable!("FIELDS and the match agree"),
        }
        Ok(out)
    }

    /// String form of a field, as accepted by [`RunConfig::set`].
    pub fn get(&self, key: &str) -> Result<String, ConfigError> {
        let field = canonical_key(key).ok_or_else(|| ConfigError::UnknownField(key.to_string()))?;
        Ok(match field {
            "task" => self.task.to_string(),
            "model_id" => self.model_id.clone(),
            "max_seq_len" => self.max_seq_len.to_string(),
            "epochs" => self.epochs.to_string(),
            "seeds" => self.seeds.iter().map(u64::to_string).collect::<Vec<_>>().join(","),
            "lcf" => self.lcf.to_string(),
            "learning_rate" => self.learning_rate.to_string(),
            "l2_reg" => self.l2_reg.to_string(),
            "batch_size" => self.batch_size.to_string(),
            "checkpoint_save_mode" => self.checkpoint_save_mode.to_string(),
            "load_aug" => self.load_aug.to_string(),
            "window" => self.window.to_string(),
            _ => unreachable!(),
        })
    }

    /// Apply `key=value` overrides, then check the result. Parse failures
    /// and rule violations are reported together.
    pub fn with_overrides<'a, I>(&self, pairs: I) -> Result<RunConfig, Vec<ConfigDiagnostic>>
    where
        I: IntoIterator<Item = (&'a str, &'a str)>,
    {
        let mut cfg = self.clone();
        let mut diags = Vec::new();
        for (k, v) in pairs {
            match cfg.set(k, v) {
                Ok(next) => cfg = next,
                Err(e) => diags.push(e.into()),
            }
        }
        diags.extend(check(&cfg));
        if diags.is_empty() {
            Ok(cfg)
        } else {
            Err(diags)
        }
    }

    /// Flat `key=value` rendering, one field per line in canonical order.
    pub fn to_kv_text(&self) -> String {
        FIELDS.iter().map(|f| format!("{f}={}\n", self.get(f).expect("known field"))).collect()
    }

    /// Parse flat `key=value` text. Blank lines and `#` comments are ignored.
    /// Returns the config plus warnings for unknown keys.
    pub fn from_kv_text(text: &str, task: TaskKind) -> Result<(RunConfig, Vec<String>), ConfigError> {
        let mut pairs = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| ConfigError::Format(format!("line {}: expected key=value", i + 1)))?;
            pairs.push((k.trim().to_string(), v.trim().to_string()));
        }
        Self::from_pairs(pairs, task)
    }

    /// Parse a JSON object; arrays become comma-separated lists.
    pub fn from_json(text: &str, task: TaskKind) -> Result<(RunConfig, Vec<String>), ConfigError> {
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| ConfigError::Format(e.to_string()))?;
        let obj = value.as_object().ok_or_else(|| ConfigError::Format("expected a JSON object".into()))?;
        let scalar = |v: &serde_json::Value| match v {
            serde_json::Value::String(s) => s.clone(),
            other => other.to_string(),
        };
        let pairs = obj
            .iter()
            .map(|(k, v)| {
                let s = match v {
                    serde_json::Value::Array(items) => items.iter().map(scalar).collect::<Vec<_>>().join(","),
                    other => scalar(other),
                };
                (k.clone(), s)
            })
            .collect();
        Self::from_pairs(pairs, task)
    }

    /// Parse either config file format, picking JSON when the text starts with `{`.
    pub fn from_file_text(text: &str, task: TaskKind) -> Result<(RunConfig, Vec<String>), ConfigError> {
        if text.trim_start().starts_with('{') {
            Self::from_json(text, task)
        } else {
            Self::from_kv_text(text, task)
        }
    }

    fn from_pairs(pairs: Vec<(String, String)>, task: TaskKind) -> Result<(RunConfig, Vec<String>), ConfigError> {
        let task = match pairs.iter().find(|(k, _)| canonical_key(k) == Some("task")) {
            Some((_, v)) => parse_field("task", v)?,
            None => task,
        };
        let mut cfg = defaults(task);
        let mut warnings = Vec::new();
        for (k, v) in &pairs {
            match cfg.set(k, v) {
                Ok(next) => cfg = next,
                Err(ConfigError::UnknownField(f)) => warnings.push(format!("ignoring unknown config key `{f}`")),
                Err(e) => return Err(e),
            }
        }
        Ok((cfg, warnings))
    }

    /// Model ids valid for this config's task.
    pub fn known_models(&self) -> &'static [&'static str] {
        match self.task {
            TaskKind::Asc => &ASC_MODELS,
            TaskKind::Atesc => &ATESC_MODELS,
        }
    }

    /// Context mode actually used by the model: pinned by `lr-cdw`/`lr-cdm`.
    pub fn effective_lcf(&self) -> LcfMode {
        match self.model_id.as_str() {
            "lr-cdw" => LcfMode::Cdw,
            "lr-cdm" => LcfMode::Cdm,
            _ => self.lcf,
        }
    }
}

/// Every rule `config` violates; empty when the config is usable.
pub fn check(config: &RunConfig) -> Vec<ConfigDiagnostic> {
    let mut out = Vec::new();
    let mut flag = |field: &str, rule: String, value: String| {
        out.push(ConfigDiagnostic { field: field.into(), rule, value });
    };
    if !config.known_models().contains(&config.model_id.as_str()) {
        flag(
            "model_id",
            format!("must be one of {} for {}", config.known_models().join(", "), config.task),
            config.model_id.clone(),
        );
    }
    let (lo, hi) = MAX_SEQ_LEN_RANGE;
    if !(lo..=hi).contains(&config.max_seq_len) {
        flag("max_seq_len", format!("must be in {lo}..={hi}"), config.max_seq_len.to_string());
    }
    let (lo, hi) = EPOCHS_RANGE;
    if !(lo..=hi).contains(&config.epochs) {
        flag("epochs", format!("must be in {lo}..={hi}"), config.epochs.to_string());
    }
    if config.seeds.is_empty() {
        flag("seeds", "must not be empty".into(), String::new());
    }
    let mut seen = HashSet::new();
    if let Some(dup) = config.seeds.iter().find(|s| !seen.insert(**s)) {
        flag("seeds", "must not contain duplicates".into(), dup.to_string());
    }
    if !(config.learning_rate.is_finite() && config.learning_rate > 0.0) {
        flag("learning_rate", "must be a positive finite number".into(), config.learning_rate.to_string());
    }
    if !(config.l2_reg.is_finite() && config.l2_reg >= 0.0) {
        flag("l2_reg", "must be a nonnegative finite number".into(), config.l2_reg.to_string());
    }
    if config.batch_size == 0 {
        flag("batch_size", "must be positive".into(), "0".into());
    }
    if config.window == 0 {
        flag("window", "must be positive".into(), "0".into());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        for task in [TaskKind::Asc, TaskKind::Atesc] {
            let cfg = defaults(task);
            assert_eq!(cfg.epochs, 10);
            assert_eq!(cfg.task, task);
            assert!(check(&cfg).is_empty(), "{:?}", check(&cfg));
        }
    }

    #[test]
    fn max_seq_len_rules() {
        let base = defaults(TaskKind::Asc);
        assert!(check(&base.set("max_seq_len", "80").unwrap()).is_empty());
        let diags = check(&base.set("max_seq_len", "0").unwrap());
        assert_eq!(diags.len(), 1);
        assert_eq!(diags[0].field, "max_seq_len");
        assert_eq!(diags[0].value, "0");
    }

    #[test]
    fn bad_lcf_is_one_diagnostic() {
        let diags = defaults(TaskKind::Asc).with_overrides([("lcf", "xyz")]).unwrap_err();
        assert_eq!(diags.len(), 1);
        assert_eq!(diags[0].field, "lcf");
    }

    #[test]
    fn set_does_not_mutate() {
        let base = defaults(TaskKind::Asc);
        let three = base.set("epochs", "3").unwrap();
        assert_eq!(three.epochs, 3);
        assert_eq!(base.epochs, 10);
        assert_eq!(base.set("nope", "1"), Err(ConfigError::UnknownField("nope".into())));
        assert!(matches!(base.set("epochs", "abc"), Err(ConfigError::ParseFailure { .. })));
    }

    #[test]
    fn seeds_and_duplicates() {
        let cfg = defaults(TaskKind::Asc).set("seeds", "1, 2,3").unwrap();
        assert_eq!(cfg.seeds, vec![1, 2, 3]);
        let dup = cfg.set("seeds", "4,4").unwrap();
        assert_eq!(check(&dup)[0].field, "seeds");
        let empty = cfg.set("seeds", "").unwrap();
        assert_eq!(check(&empty)[0].rule, "must not be empty");
    }

    #[test]
    fn files_round_trip_and_warn_on_unknown_keys() {
        let cfg = defaults(TaskKind::Atesc).set("learning_rate", "0.05").unwrap();
        let (back, warnings) = RunConfig::from_kv_text(&cfg.to_kv_text(), TaskKind::Asc).unwrap();
        assert_eq!(back, cfg);
        assert!(warnings.is_empty());

        let json = r#"{"task": "ASC", "seeds": [3, 4], "epochs": 2, "auto_device": true}"#;
        let (cfg, warnings) = RunConfig::from_json(json, TaskKind::Atesc).unwrap();
        assert_eq!(cfg.task, TaskKind::Asc);
        assert_eq!(cfg.seeds, vec![3, 4]);
        assert_eq!(cfg.epochs, 2);
        assert_eq!(warnings.len(), 1);

        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(serde_json::from_str::<RunConfig>(&text).unwrap(), cfg);
    }

    #[test]
    fn unknown_model_is_flagged() {
        let cfg = defaults(TaskKind::Asc).set("model", "perceptron-iob").unwrap();
        assert_eq!(check(&cfg)[0].field, "model_id");
        assert_eq!(defaults(TaskKind::Asc).set("model", "lr-cdm").unwrap().effective_lcf(), LcfMode::Cdm);
    }
}
