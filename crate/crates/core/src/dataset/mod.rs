//! Dataset registry: unique ids and names, local directory discovery,
//! manifest-driven fetching, combination and loading.
//!
//! Local datasets follow the layout `<root>/<task>/<name>/<split-files>`.
//! A file's split is read from its name: `.augment` marks augmentation
//! data for the training split, otherwise `train`, `valid`/`dev` and `test`
//! select the split.

pub mod catalog;
mod manifest;

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::corpus::{self, Corpus, CorpusError, EncodingKind};
use crate::hub::HubError;
use crate::TaskKind;

pub use manifest::{FetchReport, Manifest, ManifestEntry, ManifestFile};

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("dataset id {0} is already registered")]
    DuplicateId(u32),
    #[error("dataset name `{0}` is already registered")]
    DuplicateName(String),
    #[error("dataset id 0 is reserved for combined datasets")]
    ReservedId,
    #[error("cannot combine datasets of different tasks ({0} and {1})")]
    MixedTask(TaskKind, TaskKind),
    #[error("nothing to combine")]
    EmptyCombine,
    #[error("no dataset `{0}`")]
    NotFound(String),
    #[error("{path}: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: CorpusError,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Hub(#[from] HubError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitRole {
    Train,
    Valid,
    Test,
    Augment,
}

impl SplitRole {
    /// Split of a dataset file, judged by its file name.
    pub fn classify(file_name: &str) -> Option<SplitRole> {
        let lower = file_name.to_ascii_lowercase();
        if lower.contains(".augment") {
            Some(SplitRole::Augment)
        } else if lower.contains("train") {
            Some(SplitRole::Train)
        } else if lower.contains("valid") || lower.contains("dev") {
            Some(SplitRole::Valid)
        } else if lower.contains("test") {
            Some(SplitRole::Test)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Splits {
    pub train: Vec<PathBuf>,
    pub valid: Vec<PathBuf>,
    pub test: Vec<PathBuf>,
}

/// Reference example counts, e.g. from the catalog or a manifest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ExampleCounts {
    pub train: usize,
    pub valid: usize,
    pub test: usize,
    pub augmented: usize,
}

impl std::ops::Add for ExampleCounts {
    type Output = ExampleCounts;

    fn add(self, o: ExampleCounts) -> ExampleCounts {
        ExampleCounts {
            train: self.train + o.train,
            valid: self.valid + o.valid,
            test: self.test + o.test,
            augmented: self.augmented + o.augmented,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind", content = "location")]
pub enum Origin {
    Local(PathBuf),
    Manifest(String),
    Builtin,
    Combined,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetHandle {
    pub id: u32,
    pub name: String,
    pub language: String,
    pub task: TaskKind,
    pub splits: Splits,
    #[serde(default)]
    pub aug_files: Vec<PathBuf>,
    pub origin: Origin,
    #[serde(default)]
    pub adversarial: bool,
    #[serde(default)]
    pub expected: Option<ExampleCounts>,
}

impl DatasetHandle {
    /// Handle over the files of one dataset directory.
    pub fn from_dir(id: u32, dir: &Path, task: TaskKind) -> Result<Self, DatasetError> {
        let name = dir
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| dir.display().to_string());
        let mut files: Vec<PathBuf> = fs::read_dir(dir)
            .map_err(|e| DatasetError::Io { path: dir.to_path_buf(), source: e })?
            .filter_map(|entry| entry.ok().map(|e| e.path()))
            .filter(|p| p.is_file())
            .collect();
        files.sort();
        let mut handle = DatasetHandle {
            id,
            name,
            language: "unknown".into(),
            task,
            splits: Splits::default(),
            aug_files: Vec::new(),
            origin: Origin::Local(dir.to_path_buf()),
            adversarial: false,
            expected: None,
        };
        if let Some(entry) = catalog::find(&handle.name) {
            handle.language = entry.language.into();
            handle.adversarial = entry.adversarial;
            handle.expected =
                Some(ExampleCounts { train: entry.train, valid: entry.valid, test: entry.test, augmented: entry.augmented });
        }
        for file in files {
            let role = file.file_name().and_then(|n| n.to_str()).and_then(SplitRole::classify);
            if let Some(role) = role {
                handle.add_file(role, file);
            }
        }
        Ok(handle)
    }

    pub fn add_file(&mut self, role: SplitRole, path: PathBuf) {
        let list = match role {
            SplitRole::Train => &mut self.splits.train,
            SplitRole::Valid => &mut self.splits.valid,
            SplitRole::Test => &mut self.splits.test,
            SplitRole::Augment => &mut self.aug_files,
        };
        if !list.contains(&path) {
            list.push(path);
        }
    }

    pub fn encoding(&self) -> EncodingKind {
        encoding_for(self.task)
    }

    pub fn is_trainable(&self) -> bool {
        !self.splits.train.is_empty()
    }
}

/// On-disk encoding used by datasets of a task.
pub fn encoding_for(task: TaskKind) -> EncodingKind {
    match task {
        TaskKind::Asc => EncodingKind::AscTriples,
        TaskKind::Atesc => EncodingKind::AtescColumns,
    }
}

/// Registry of datasets addressable by id or case-insensitive name.
#[derive(Debug, Clone, Default)]
pub struct DatasetRegistry {
    handles: Vec<DatasetHandle>,
    by_id: HashMap<u32, usize>,
    by_name: HashMap<String, usize>,
}

impl DatasetRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registry seeded with the reference catalog (ids 1..=26, no files).
    pub fn builtin() -> Self {
        let mut reg = Self::new();
        for (i, e) in catalog::CATALOG.iter().enumerate() {
            reg.register(DatasetHandle {
                id: i as u32 + 1,
                name: e.name.into(),
                language: e.language.into(),
                task: TaskKind::Asc,
                splits: Splits::default(),
                aug_files: Vec::new(),
                origin: Origin::Builtin,
                adversarial: e.adversarial,
                expected: Some(ExampleCounts { train: e.train, valid: e.valid, test: e.test, augmented: e.augmented }),
            })
            .expect("catalog names are unique");
        }
        reg
    }

    pub fn register(&mut self, handle: DatasetHandle) -> Result<&DatasetHandle, DatasetError> {
        if handle.id == 0 {
            return Err(DatasetError::ReservedId);
        }
        if self.by_id.contains_key(&handle.id) {
            return Err(DatasetError::DuplicateId(handle.id));
        }
        let key = handle.name.to_lowercase();
        if self.by_name.contains_key(&key) {
            return Err(DatasetError::DuplicateName(handle.name));
        }
        let idx = self.handles.len();
        self.by_id.insert(handle.id, idx);
        self.by_name.insert(key, idx);
        self.handles.push(handle);
        Ok(&self.handles[idx])
    }

    pub fn get(&self, id: u32) -> Option<&DatasetHandle> {
        self.by_id.get(&id).map(|&i| &self.handles[i])
    }

    pub fn lookup(&self, name: &str) -> Option<&DatasetHandle> {
        self.by_name.get(&name.to_lowercase()).map(|&i| &self.handles[i])
    }

    /// Look a dataset up by numeric id or by name.
    pub fn resolve(&self, key: &str) -> Result<&DatasetHandle, DatasetError> {
        key.parse::<u32>()
            .ok()
            .and_then(|id| self.get(id))
            .or_else(|| self.lookup(key))
            .ok_or_else(|| DatasetError::NotFound(key.to_string()))
    }

    pub(crate) fn get_mut(&mut self, id: u32) -> Option<&mut DatasetHandle> {
        self.by_id.get(&id).map(|&i| &mut self.handles[i])
    }

    /// Handles in registration order.
    pub fn handles(&self) -> &[DatasetHandle] {
        &self.handles
    }

    pub fn len(&self) -> usize {
        self.handles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.handles.is_empty()
    }

    pub fn next_id(&self) -> u32 {
        self.by_id.keys().max().map_or(1, |m| m + 1)
    }

    /// Register every `<root>/<task>/<name>/` directory below `root`.
    /// Directories whose name is already registered are skipped.
    pub fn register_dir(&mut self, root: &Path) -> Result<Vec<u32>, DatasetError> {
        let mut added = Vec::new();
        for task in [TaskKind::Asc, TaskKind::Atesc] {
            let task_dir = root.join(task.as_str().to_lowercase());
            let Ok(entries) = fs::read_dir(&task_dir) else { continue };
            let mut dirs: Vec<PathBuf> =
                entries.filter_map(|e| e.ok().map(|e| e.path())).filter(|p| p.is_dir()).collect();
            dirs.sort();
            for dir in dirs {
                let handle = DatasetHandle::from_dir(self.next_id(), &dir, task)?;
                if self.lookup(&handle.name).is_some() {
                    continue;
                }
                added.push(self.register(handle)?.id);
            }
        }
        Ok(added)
    }

    /// Pile of every registered dataset, named "Multilingual".
    pub fn multilingual(&self) -> Result<DatasetHandle, DatasetError> {
        let all: Vec<&DatasetHandle> = self.handles.iter().collect();
        let mut pile = combine(&all)?;
        pile.name = "Multilingual".into();
        Ok(pile)
    }
}

/// Synthetic dataset whose splits concatenate the members' splits.
///
/// The result carries id 0 and is not registered anywhere.
pub fn combine(handles: &[&DatasetHandle]) -> Result<DatasetHandle, DatasetError> {
    let (first, rest) = handles.split_first().ok_or(DatasetError::EmptyCombine)?;
    if let Some(other) = rest.iter().find(|h| h.task != first.task) {
        return Err(DatasetError::MixedTask(first.task, other.task));
    }
    let same_language = rest.iter().all(|h| h.language == first.language);
    let mut out = DatasetHandle {
        id: 0,
        name: handles.iter().map(|h| h.name.as_str()).collect::<Vec<_>>().join("+"),
        language: if same_language { first.language.clone() } else { "Multilingual".into() },
        task: first.task,
        splits: Splits::default(),
        aug_files: Vec::new(),
        origin: Origin::Combined,
        adversarial: handles.iter().any(|h| h.adversarial),
        expected: handles.iter().map(|h| h.expected).sum::<Option<ExampleCounts>>(),
    };
    for h in handles {
        out.splits.train.extend(h.splits.train.iter().cloned());
        out.splits.valid.extend(h.splits.valid.iter().cloned());
        out.splits.test.extend(h.splits.test.iter().cloned());
        out.aug_files.extend(h.aug_files.iter().cloned());
    }
    Ok(out)
}

impl std::iter::Sum for ExampleCounts {
    fn sum<I: Iterator<Item = ExampleCounts>>(iter: I) -> Self {
        iter.fold(ExampleCounts::default(), |a, b| a + b)
    }
}

/// Parsed splits of one dataset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LoadedDataset {
    pub name: String,
    pub task: TaskKind,
    pub train: Corpus,
    pub valid: Corpus,
    pub test: Corpus,
}

pub fn empty_corpus(task: TaskKind) -> Corpus {
    match task {
        TaskKind::Asc => Corpus::Triples(Vec::new()),
        TaskKind::Atesc => Corpus::Examples(Vec::new()),
    }
}

/// Parse every file of one split in order.
pub fn load_files(files: &[PathBuf], task: TaskKind) -> Result<Corpus, DatasetError> {
    let mut out = empty_corpus(task);
    for path in files {
        let bytes = fs::read(path).map_err(|e| DatasetError::Io { path: path.clone(), source: e })?;
        let parsed = corpus::parse_bytes(&bytes, encoding_for(task))
            .map_err(|e| DatasetError::Parse { path: path.clone(), source: e })?;
        out.extend(parsed).expect("same record shape");
    }
    Ok(out)
}

/// Load every split. With `with_aug`, augmentation files are appended to
/// the training split; other splits never change.
pub fn load(handle: &DatasetHandle, with_aug: bool) -> Result<LoadedDataset, DatasetError> {
    let mut train = load_files(&handle.splits.train, handle.task)?;
    if with_aug {
        train.extend(load_files(&handle.aug_files, handle.task)?).expect("same record shape");
    }
    Ok(LoadedDataset {
        name: handle.name.clone(),
        task: handle.task,
        train,
        valid: load_files(&handle.splits.valid, handle.task)?,
        test: load_files(&handle.splits.test, handle.task)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn handle(id: u32, name: &str, task: TaskKind) -> DatasetHandle {
        DatasetHandle {
            id,
            name: name.into(),
            language: "English".into(),
            task,
            splits: Splits::default(),
            aug_files: Vec::new(),
            origin: Origin::Builtin,
            adversarial: false,
            expected: None,
        }
    }

    #[test]
    fn lookup_is_case_insensitive_and_consistent() {
        let mut reg = DatasetRegistry::new();
        reg.register(handle(7, "Laptop14", TaskKind::Asc)).unwrap();
        assert_eq!(reg.lookup("laptop14"), reg.get(7));
        assert_eq!(reg.resolve("7").unwrap().name, "Laptop14");
        assert!(matches!(reg.register(handle(7, "Other", TaskKind::Asc)), Err(DatasetError::DuplicateId(7))));
        assert!(matches!(
            reg.register(handle(8, "LAPTOP14", TaskKind::Asc)),
            Err(DatasetError::DuplicateName(_))
        ));
        assert!(matches!(reg.register(handle(0, "x", TaskKind::Asc)), Err(DatasetError::ReservedId)));
    }

    #[test]
    fn builtin_catalog_has_26_entries() {
        let reg = DatasetRegistry::builtin();
        assert_eq!(reg.len(), 26);
        assert_eq!(reg.lookup("mams").unwrap().expected.unwrap().valid, 1332);
        let pile = reg.multilingual().unwrap();
        assert_eq!(pile.name, "Multilingual");
        assert_eq!(pile.language, "Multilingual");
        let total: usize = catalog::CATALOG.iter().map(|e| e.train).sum();
        assert_eq!(pile.expected.unwrap().train, total);
    }

    #[test]
    fn combine_rejects_mixed_tasks() {
        let a = handle(1, "a", TaskKind::Asc);
        let b = handle(2, "b", TaskKind::Atesc);
        assert!(matches!(combine(&[&a, &b]), Err(DatasetError::MixedTask(..))));
        assert!(matches!(combine(&[]), Err(DatasetError::EmptyCombine)));
    }

    #[test]
    fn split_classification() {
        assert_eq!(SplitRole::classify("laptop14.train.txt"), Some(SplitRole::Train));
        assert_eq!(SplitRole::classify("laptop14.train.augment.txt"), Some(SplitRole::Augment));
        assert_eq!(SplitRole::classify("x.dev.txt"), Some(SplitRole::Valid));
        assert_eq!(SplitRole::classify("Test.txt"), Some(SplitRole::Test));
        assert_eq!(SplitRole::classify("README"), None);
    }
}
