//! Checkpoint store: save and load trained models, search by task and
//! keyword, and fetch checkpoints from a static hub manifest.
//!
//! Layout: `<store>/<TASK>/<name>/{meta.json, weights.bin}`, where `TASK`
//! is the task code (`ASC`, `ATE` or `ATESC`).

mod payload;

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

pub use payload::{decode as decode_payload, encode as encode_payload, Record};

use crate::config::RunConfig;
use crate::hub::{self, HubError};
use crate::training::{EvalResult, ModelKind, TrainedModel};
use crate::TaskKind;

pub const META_FILE: &str = "meta.json";
pub const WEIGHTS_FILE: &str = "weights.bin";
const LOCK_FILE: &str = ".lock";
const LOCK_ATTEMPTS: u32 = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TaskCode {
    #[serde(rename = "ASC")]
    Asc,
    #[serde(rename = "ATE")]
    Ate,
    #[serde(rename = "ATESC")]
    Atesc,
}

impl TaskCode {
    pub fn as_str(self) -> &'static str {
        match self {
            TaskCode::Asc => "ASC",
            TaskCode::Ate => "ATE",
            TaskCode::Atesc => "ATESC",
        }
    }

    /// Task code a trained baseline is saved under.
    pub fn of(task: TaskKind) -> Self {
        match task {
            TaskKind::Asc => TaskCode::Asc,
            TaskKind::Atesc => TaskCode::Atesc,
        }
    }

    /// Model family able to serve this code.
    pub fn task(self) -> TaskKind {
        match self {
            TaskCode::Asc => TaskKind::Asc,
            TaskCode::Ate | TaskCode::Atesc => TaskKind::Atesc,
        }
    }
}

impl fmt::Display for TaskCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TaskCode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "ASC" | "APC" => Ok(TaskCode::Asc),
            "ATE" => Ok(TaskCode::Ate),
            "ATESC" | "ATEPC" | "E2EABSA" => Ok(TaskCode::Atesc),
            _ => Err(format!("unknown task code `{s}` (expected ASC, ATE or ATESC)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub name: String,
    pub task_code: TaskCode,
    pub model_id: String,
    pub config: RunConfig,
    pub metrics: EvalResult,
    /// Hex SHA-256 of `weights.bin`.
    pub digest: String,
    pub created_at: DateTime<Utc>,
    pub toolkit_version: String,
}

#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("checkpoint `{name}` already exists with different weights")]
    NameCollision { name: String },
    #[error("{path}: weights digest {actual} does not match recorded {expected}")]
    DigestMismatch { path: PathBuf, expected: String, actual: String },
    #[error("{path}: {message}")]
    Corrupt { path: PathBuf, message: String },
    #[error("checkpoint metadata does not match the model: {0}")]
    MetaMismatch(String),
    #[error("invalid checkpoint name `{0}`")]
    InvalidName(String),
    #[error("checkpoint `{0}` is locked by another writer")]
    Locked(String),
    #[error("no checkpoint matches `{0}`")]
    NotFound(String),
    #[error("`{key}` holds a {actual} checkpoint, expected {expected}")]
    TaskMismatch { key: String, expected: TaskKind, actual: TaskKind },
    #[error("`{key}` matches several checkpoints: {}", .candidates.join(", "))]
    Ambiguous { key: String, candidates: Vec<String> },
    #[error(transparent)]
    Hub(#[from] HubError),
}

impl CheckpointError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        CheckpointError::Io { path: path.to_path_buf(), source }
    }
}

fn check_name(name: &str) -> Result<(), CheckpointError> {
    let ok = !name.is_empty()
        && name != "."
        && name != ".."
        && !name.starts_with('.')
        && name.chars().all(|c| c.is_alphanumeric() || matches!(c, '-' | '_' | '.' | '+'));
    if ok {
        Ok(())
    } else {
        Err(CheckpointError::InvalidName(name.to_string()))
    }
}

/// Exclusive write access to one checkpoint directory, released on drop.
struct DirLock {
    path: PathBuf,
}

impl DirLock {
    fn acquire(dir: &Path, name: &str) -> Result<Self, CheckpointError> {
        let parent = dir.parent().expect("checkpoint dirs live below a task dir");
        fs::create_dir_all(parent).map_err(|e| CheckpointError::io(parent, e))?;
        let path = parent.join(format!("{name}{LOCK_FILE}"));
        for _ in 0..LOCK_ATTEMPTS {
            match fs::OpenOptions::new().write(true).create_new(true).open(&path) {
                Ok(_) => return Ok(DirLock { path }),
                Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => std::thread::sleep(Duration::from_millis(10)),
                Err(e) => return Err(CheckpointError::io(&path, e)),
            }
        }
        Err(CheckpointError::Locked(name.to_string()))
    }
}

impl Drop for DirLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

fn model_task(kind: &ModelKind) -> TaskKind {
    match kind {
        ModelKind::Asc(_) => TaskKind::Asc,
        ModelKind::Atesc(_) => TaskKind::Atesc,
    }
}

pub fn checkpoint_dir(store: &Path, task_code: TaskCode, name: &str) -> PathBuf {
    store.join(task_code.as_str()).join(name)
}

/// Save `model` as `name` in `store`.
///
/// Saving identical weights under an existing name is a no-op that returns
/// the existing directory; different weights under that name fail.
pub fn save(
    store: &Path,
    name: &str,
    model: &TrainedModel,
    config: &RunConfig,
    metrics: EvalResult,
) -> Result<PathBuf, CheckpointError> {
    check_name(name)?;
    let task = model_task(&model.kind);
    if config.task != task {
        return Err(CheckpointError::MetaMismatch(format!("config task {} but model task {task}", config.task)));
    }
    if config.model_id != model.model_id {
        return Err(CheckpointError::MetaMismatch(format!(
            "config model `{}` but model `{}`",
            config.model_id, model.model_id
        )));
    }
    let task_code = TaskCode::of(task);
    let dir = checkpoint_dir(store, task_code, name);
    let _lock = DirLock::acquire(&dir, name)?;

    let weights = payload::encode(&model.kind);
    let digest = hub::sha256_hex(&weights);
    let meta_path = dir.join(META_FILE);
    if meta_path.is_file() {
        let existing = read_meta(&meta_path)?;
        if existing.digest == digest && dir.join(WEIGHTS_FILE).is_file() {
            return Ok(dir);
        }
        return Err(CheckpointError::NameCollision { name: name.to_string() });
    }
    let meta = CheckpointMeta {
        name: name.to_string(),
        task_code,
        model_id: model.model_id.clone(),
        config: config.clone(),
        metrics,
        digest,
        created_at: Utc::now(),
        toolkit_version: crate::TOOLKIT_VERSION.to_string(),
    };
    hub::write_atomic(&dir.join(WEIGHTS_FILE), &weights)?;
    let json = serde_json::to_vec_pretty(&meta).expect("meta serializes");
    hub::write_atomic(&meta_path, &json)?;
    Ok(dir)
}

fn read_meta(path: &Path) -> Result<CheckpointMeta, CheckpointError> {
    let bytes = fs::read(path).map_err(|e| CheckpointError::io(path, e))?;
    serde_json::from_slice(&bytes).map_err(|e| CheckpointError::Corrupt { path: path.to_path_buf(), message: e.to_string() })
}

/// Load and verify a checkpoint directory.
pub fn load(dir: &Path) -> Result<(CheckpointMeta, TrainedModel), CheckpointError> {
    let meta = read_meta(&dir.join(META_FILE))?;
    let weights_path = dir.join(WEIGHTS_FILE);
    let bytes = fs::read(&weights_path).map_err(|e| CheckpointError::io(&weights_path, e))?;
    let actual = hub::sha256_hex(&bytes);
    if !actual.eq_ignore_ascii_case(&meta.digest) {
        return Err(CheckpointError::DigestMismatch { path: weights_path, expected: meta.digest.clone(), actual });
    }
    let kind = payload::decode_model(&bytes, meta.task_code.task() == TaskKind::Atesc)
        .map_err(|message| CheckpointError::Corrupt { path: weights_path.clone(), message })?;
    let model = TrainedModel { model_id: meta.model_id.clone(), kind };
    Ok((meta, model))
}

/// Every checkpoint directory in `store`, sorted by path.
fn local_dirs(store: &Path) -> Vec<PathBuf> {
    let Ok(tasks) = fs::read_dir(store) else { return Vec::new() };
    let mut out: Vec<PathBuf> = tasks
        .flatten()
        .filter(|t| t.file_name().to_str().is_some_and(|n| n.parse::<TaskCode>().is_ok()))
        .filter_map(|t| fs::read_dir(t.path()).ok())
        .flat_map(|entries| entries.flatten().map(|e| e.path()))
        .filter(|p| p.join(META_FILE).is_file())
        .collect();
    out.sort();
    out
}

/// Checkpoint directories whose name contains any keyword, ignoring case.
/// No keywords selects every checkpoint.
pub fn find_local(store: &Path, keywords: &[&str]) -> Vec<PathBuf> {
    let keys: Vec<String> = keywords.iter().map(|k| k.to_lowercase()).collect();
    local_dirs(store)
        .into_iter()
        .filter(|p| {
            let name = p.file_name().and_then(|n| n.to_str()).unwrap_or_default().to_lowercase();
            keys.is_empty() || keys.iter().any(|k| name.contains(k.as_str()))
        })
        .collect()
}

/// Where a listed checkpoint lives.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "at", rename_all = "lowercase")]
pub enum Location {
    Local(PathBuf),
    /// Directory URL on a hub, relative files resolved against it.
    Remote(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointEntry {
    pub meta: CheckpointMeta,
    pub location: Location,
}

impl CheckpointEntry {
    pub fn is_remote(&self) -> bool {
        matches!(self.location, Location::Remote(_))
    }
}

/// Hub manifest listing checkpoints next to their files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HubManifest {
    #[serde(default = "one")]
    pub version: u32,
    pub checkpoints: Vec<HubCheckpoint>,
}

fn one() -> u32 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HubCheckpoint {
    /// Directory holding `meta.json` and `weights.bin`, relative to the manifest.
    pub path: String,
    pub meta_sha256: String,
    pub meta: CheckpointMeta,
}

impl HubManifest {
    pub fn load(url: &str) -> Result<Self, HubError> {
        let bytes = hub::fetch_bytes(url)?;
        serde_json::from_slice(&bytes).map_err(|e| HubError::ManifestParse { url: url.to_string(), message: e.to_string() })
    }

    /// Manifest entry for a checkpoint already saved at `dir`, whose path
    /// relative to the manifest is `rel`.
    pub fn entry_for(dir: &Path, rel: &str) -> Result<HubCheckpoint, CheckpointError> {
        let meta_path = dir.join(META_FILE);
        let bytes = fs::read(&meta_path).map_err(|e| CheckpointError::io(&meta_path, e))?;
        Ok(HubCheckpoint { path: rel.to_string(), meta_sha256: hub::sha256_hex(&bytes), meta: read_meta(&meta_path)? })
    }
}

/// A place to look for checkpoints.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Source {
    Store(PathBuf),
    Hub(String),
}

/// Checkpoints with the given task code across all sources, by name.
/// Local entries win over hub entries of the same name. Unreachable hubs
/// and unreadable metadata produce warnings instead of errors.
pub fn available_checkpoints(task_code: TaskCode, sources: &[Source]) -> (BTreeMap<String, CheckpointEntry>, Vec<String>) {
    let mut out = BTreeMap::new();
    let mut warnings = Vec::new();
    for source in sources {
        match source {
            Source::Store(store) => {
                for dir in local_dirs(store) {
                    match read_meta(&dir.join(META_FILE)) {
                        Ok(meta) if meta.task_code == task_code => {
                            out.insert(meta.name.clone(), CheckpointEntry { meta, location: Location::Local(dir) });
                        }
                        Ok(_) => {}
                        Err(e) => warnings.push(e.to_string()),
                    }
                }
            }
            Source::Hub(url) => match HubManifest::load(url) {
                Ok(manifest) => {
                    for c in manifest.checkpoints.into_iter().filter(|c| c.meta.task_code == task_code) {
                        let location = Location::Remote(hub::resolve(url, &c.path));
                        out.entry(c.meta.name.clone()).or_insert(CheckpointEntry { meta: c.meta, location });
                    }
                }
                Err(e) => warnings.push(format!("hub unavailable, listing local checkpoints only: {e}")),
            },
        }
    }
    (out, warnings)
}

/// Download a hub checkpoint into `store`, verifying both files.
pub fn download(url: &str, entry: &HubCheckpoint, store: &Path) -> Result<PathBuf, CheckpointError> {
    check_name(&entry.meta.name)?;
    let dir = checkpoint_dir(store, entry.meta.task_code, &entry.meta.name);
    let _lock = DirLock::acquire(&dir, &entry.meta.name)?;
    let base = hub::resolve(url, &entry.path);
    let base = base.trim_end_matches('/');
    hub::download_verified(&format!("{base}/{META_FILE}"), &entry.meta_sha256, &dir.join(META_FILE))?;
    let meta = read_meta(&dir.join(META_FILE))?;
    hub::download_verified(&format!("{base}/{WEIGHTS_FILE}"), &meta.digest, &dir.join(WEIGHTS_FILE))?;
    Ok(dir)
}

/// Where [`load_predictor`] looks.
#[derive(Debug, Clone, Default)]
pub struct Lookup {
    pub store: PathBuf,
    pub hub: Option<String>,
    /// Required model family, if any.
    pub task: Option<TaskKind>,
}

/// Build a predictor from a checkpoint directory path, a local name or
/// keyword, or a hub checkpoint name (downloaded into the store first).
pub fn load_predictor(source: &str, lookup: &Lookup) -> Result<(CheckpointMeta, TrainedModel), CheckpointError> {
    let finish = |(meta, model): (CheckpointMeta, TrainedModel)| {
        let actual = meta.task_code.task();
        match lookup.task {
            Some(expected) if expected != actual => {
                Err(CheckpointError::TaskMismatch { key: source.to_string(), expected, actual })
            }
            _ => Ok((meta, model)),
        }
    };

    let path = Path::new(source);
    if path.join(META_FILE).is_file() {
        return finish(load(path)?);
    }

    let family = |p: &PathBuf| {
        let code = p.parent().and_then(|t| t.file_name()).and_then(|n| n.to_str()).and_then(|n| n.parse::<TaskCode>().ok());
        lookup.task.is_none_or(|t| code.is_some_and(|c| c.task() == t))
    };
    let matches: Vec<PathBuf> = find_local(&lookup.store, &[source]).into_iter().filter(family).collect();
    let exact: Vec<&PathBuf> =
        matches.iter().filter(|p| p.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.eq_ignore_ascii_case(source))).collect();
    let chosen: Option<&PathBuf> = match (exact.as_slice(), matches.as_slice()) {
        ([one], _) => Some(one),
        ([], [one]) => Some(one),
        ([], []) => None,
        (candidates, all) => {
            let list: Vec<&PathBuf> = if candidates.is_empty() { all.iter().collect() } else { candidates.to_vec() };
            return Err(CheckpointError::Ambiguous {
                key: source.to_string(),
                candidates: list.iter().map(|p| p.display().to_string()).collect(),
            });
        }
    };
    if let Some(dir) = chosen {
        return finish(load(dir)?);
    }

    if let Some(url) = &lookup.hub {
        let manifest = HubManifest::load(url)?;
        if let Some(entry) = manifest
            .checkpoints
            .iter()
            .find(|c| c.meta.name == source && lookup.task.is_none_or(|t| c.meta.task_code.task() == t))
        {
            let dir = download(url, entry, &lookup.store)?;
            return finish(load(&dir)?);
        }
    }
    Err(CheckpointError::NotFound(source.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::defaults;
    use crate::training::{AscModel, FeatureConfig};

    fn tiny_model(bias: f64) -> (TrainedModel, RunConfig) {
        let cfg = defaults(TaskKind::Asc);
        let mut m = AscModel::untrained(FeatureConfig::from_run(&cfg));
        m.vocab.insert("good".into(), 0);
        m.params = crate::training::AscParams { n_features: 1, weights: vec![-1.0, 0.0, 1.0], bias: [0.0, bias, 0.0] };
        (TrainedModel { model_id: cfg.model_id.clone(), kind: ModelKind::Asc(m) }, cfg)
    }

    fn metrics() -> EvalResult {
        EvalResult { acc_asc: 0.9, f1_asc: 0.8, f1_ate: None }
    }

    #[test]
    fn save_is_idempotent_and_detects_collisions() {
        let store = tempfile::tempdir().unwrap();
        let (model, cfg) = tiny_model(0.1);
        let a = save(store.path(), "asc-laptop14-1", &model, &cfg, metrics()).unwrap();
        let meta_before = fs::read(a.join(META_FILE)).unwrap();
        let b = save(store.path(), "asc-laptop14-1", &model, &cfg, metrics()).unwrap();
        assert_eq!(a, b);
        assert_eq!(fs::read(a.join(META_FILE)).unwrap(), meta_before);
        let (other, _) = tiny_model(0.2);
        assert!(matches!(
            save(store.path(), "asc-laptop14-1", &other, &cfg, metrics()),
            Err(CheckpointError::NameCollision { .. })
        ));
        let (meta, loaded) = load(&a).unwrap();
        assert_eq!(loaded, model);
        assert_eq!(meta.task_code, TaskCode::Asc);
        assert!(!store.path().join("ASC").join("asc-laptop14-1.lock").exists());
    }

    #[test]
    fn corrupted_weights_fail_the_digest() {
        let store = tempfile::tempdir().unwrap();
        let (model, cfg) = tiny_model(0.0);
        let dir = save(store.path(), "m", &model, &cfg, metrics()).unwrap();
        let mut bytes = fs::read(dir.join(WEIGHTS_FILE)).unwrap();
        let last = bytes.len() - 1;
        bytes[last] ^= 1;
        fs::write(dir.join(WEIGHTS_FILE), bytes).unwrap();
        assert!(matches!(load(&dir), Err(CheckpointError::DigestMismatch { .. })));
    }

    #[test]
    fn keyword_search_and_task_queries() {
        let store = tempfile::tempdir().unwrap();
        assert!(find_local(store.path(), &["x"]).is_empty());
        assert!(find_local(&store.path().join("missing"), &[]).is_empty());
        let (model, cfg) = tiny_model(0.0);
        save(store.path(), "asc-laptop14-1", &model, &cfg, metrics()).unwrap();
        save(store.path(), "asc-rest14", &model, &cfg, metrics()).unwrap();
        assert_eq!(find_local(store.path(), &["LAPTOP14"]).len(), 1);
        assert_eq!(find_local(store.path(), &[]).len(), 2);
        let sources = [Source::Store(store.path().to_path_buf())];
        assert_eq!(available_checkpoints(TaskCode::Asc, &sources).0.len(), 2);
        assert!(available_checkpoints(TaskCode::Atesc, &sources).0.is_empty());

        let lookup = Lookup { store: store.path().to_path_buf(), hub: None, task: None };
        assert!(matches!(load_predictor("asc", &lookup), Err(CheckpointError::Ambiguous { .. })));
        assert!(load_predictor("laptop14", &lookup).is_ok());
        assert!(matches!(load_predictor("nothing", &lookup), Err(CheckpointError::NotFound(_))));
        let want_atesc = Lookup { task: Some(TaskKind::Atesc), ..lookup };
        assert!(matches!(load_predictor("laptop14", &want_atesc), Err(CheckpointError::NotFound(_))));
    }

    #[test]
    fn names_cannot_escape_the_store() {
        let store = tempfile::tempdir().unwrap();
        let (model, cfg) = tiny_model(0.0);
        for bad in ["", "..", "a/b", ".hidden"] {
            assert!(matches!(save(store.path(), bad, &model, &cfg, metrics()), Err(CheckpointError::InvalidName(_))));
        }
    }
}
