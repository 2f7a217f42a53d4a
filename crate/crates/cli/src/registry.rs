//! Dataset lookup for commands taking `--dataset`.

use std::path::Path;

use absakit::dataset::{catalog, DatasetHandle, DatasetRegistry, ExampleCounts, Origin, Splits};
use absakit::TaskKind;

use crate::error::{CliError, Result};

/// Datasets under `<data_root>/<task>/<name>/`, followed by catalog rows
/// that have no local copy.
pub fn local_registry(data_root: &Path) -> Result<DatasetRegistry> {
    let mut reg = DatasetRegistry::new();
    reg.register_dir(data_root)?;
    for e in catalog::CATALOG.iter() {
        if reg.lookup(e.name).is_none() {
            reg.register(DatasetHandle {
                id: reg.next_id(),
                name: e.name.into(),
                language: e.language.into(),
                task: TaskKind::Asc,
                splits: Splits::default(),
                aug_files: Vec::new(),
                origin: Origin::Builtin,
                adversarial: e.adversarial,
                expected: Some(ExampleCounts { train: e.train, valid: e.valid, test: e.test, augmented: e.augmented }),
            })?;
        }
    }
    Ok(reg)
}

/// A dataset directory path, or a name or id from the local registry.
pub fn resolve(key: &str, task: TaskKind, data_root: &Path) -> Result<DatasetHandle> {
    let path = Path::new(key);
    let handle = if path.is_dir() {
        DatasetHandle::from_dir(1, path, task)?
    } else {
        local_registry(data_root)?.resolve(key)?.clone()
    };
    if !handle.is_trainable() {
        return Err(CliError::Failed(format!(
            "dataset `{}` has no training files (looked in {}); fetch it or pass a directory",
            handle.name,
            data_root.display()
        )));
    }
    Ok(handle)
}
