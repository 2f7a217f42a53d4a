use std::path::{Component, Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{DatasetError, DatasetHandle, DatasetRegistry, ExampleCounts, Origin, SplitRole, Splits};
use crate::hub::{self, HubError};
use crate::TaskKind;

/// Dataset hub manifest: a single JSON document listing datasets and the
/// digests of their files. File paths are relative to the manifest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    #[serde(default = "default_version")]
    pub version: u32,
    pub datasets: Vec<ManifestEntry>,
}

fn default_version() -> u32 {
    1
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: u32,
    pub name: String,
    pub language: String,
    pub task: TaskKind,
    #[serde(default)]
    pub adversarial: bool,
    pub files: Vec<ManifestFile>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestFile {
    pub path: String,
    pub sha256: String,
    pub examples: usize,
    /// Overrides the split inferred from the file name.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<SplitRole>,
}

impl ManifestFile {
    pub fn role(&self) -> Option<SplitRole> {
        self.split.or_else(|| {
            let name = Path::new(&self.path).file_name()?.to_str()?;
            SplitRole::classify(name)
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FetchReport {
    /// Ids registered by this fetch (already-present identical handles excluded).
    pub registered: Vec<u32>,
    pub downloaded: usize,
    pub reused: usize,
}

impl Manifest {
    pub fn parse(text: &str, url: &str) -> Result<Self, HubError> {
        let bad = |message: String| HubError::ManifestParse { url: url.to_string(), message };
        let manifest: Manifest = serde_json::from_str(text).map_err(|e| bad(e.to_string()))?;
        for entry in &manifest.datasets {
            for f in &entry.files {
                if f.sha256.len() != 64 || !f.sha256.bytes().all(|b| b.is_ascii_hexdigit()) {
                    return Err(bad(format!("{}: `{}` is not a hex SHA-256 digest", f.path, f.sha256)));
                }
                if !is_safe_relative(&f.path) {
                    return Err(bad(format!("{}: path must be relative and stay below the manifest", f.path)));
                }
            }
        }
        Ok(manifest)
    }

    pub fn load(url: &str) -> Result<Self, HubError> {
        let bytes = hub::fetch_bytes(url)?;
        let text = String::from_utf8(bytes)
            .map_err(|e| HubError::ManifestParse { url: url.to_string(), message: e.to_string() })?;
        Self::parse(&text, url)
    }
}

fn is_safe_relative(path: &str) -> bool {
    let p = Path::new(path);
    !path.is_empty() && p.components().all(|c| matches!(c, Component::Normal(_)))
}

fn entry_handle(entry: &ManifestEntry, dest_dir: &Path, url: &str) -> DatasetHandle {
    let mut handle = DatasetHandle {
        id: entry.id,
        name: entry.name.clone(),
        language: entry.language.clone(),
        task: entry.task,
        splits: Splits::default(),
        aug_files: Vec::new(),
        origin: Origin::Manifest(url.to_string()),
        adversarial: entry.adversarial,
        expected: Some(ExampleCounts::default()),
    };
    let mut counts = ExampleCounts::default();
    for f in &entry.files {
        let Some(role) = f.role() else { continue };
        match role {
            SplitRole::Train => counts.train += f.examples,
            SplitRole::Valid => counts.valid += f.examples,
            SplitRole::Test => counts.test += f.examples,
            SplitRole::Augment => counts.augmented += f.examples,
        }
        handle.add_file(role, dest_dir.join(&f.path));
    }
    handle.expected = Some(counts);
    handle
}

impl DatasetRegistry {
    /// Download, verify and register every dataset of a manifest.
    ///
    /// Files already present with the right digest are not downloaded
    /// again, and handles identical to registered ones are left alone, so
    /// a repeated fetch is a no-op.
    pub fn fetch(&mut self, manifest_url: &str, dest_dir: &Path) -> Result<FetchReport, DatasetError> {
        let manifest = Manifest::load(manifest_url)?;
        let jobs: Vec<(String, &str, PathBuf)> = manifest
            .datasets
            .iter()
            .flat_map(|e| e.files.iter())
            .map(|f| (hub::resolve(manifest_url, &f.path), f.sha256.as_str(), dest_dir.join(&f.path)))
            .collect();
        let outcomes: Vec<Result<bool, HubError>> = jobs
            .par_iter()
            .map(|(src, digest, dest)| hub::download_verified(src, digest, dest))
            .collect();

        let mut report = FetchReport::default();
        for outcome in outcomes {
            if outcome? {
                report.downloaded += 1;
            } else {
                report.reused += 1;
            }
        }
        for entry in &manifest.datasets {
            let handle = entry_handle(entry, dest_dir, manifest_url);
            if self.get(handle.id) == Some(&handle) {
                continue;
            }
            report.registered.push(self.register(handle)?.id);
        }
        Ok(report)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_digests_and_escaping_paths() {
        let digest = "0".repeat(64);
        let ok = format!(
            r#"{{"datasets":[{{"id":1,"name":"a","language":"English","task":"ASC","files":[{{"path":"asc/a/a.train.txt","sha256":"{digest}","examples":3}}]}}]}}"#
        );
        assert!(Manifest::parse(&ok, "m.json").is_ok());
        let bad_digest = ok.replace(&digest, "xyz");
        assert!(matches!(Manifest::parse(&bad_digest, "m.json"), Err(HubError::ManifestParse { .. })));
        let escape = ok.replace("asc/a/a.train.txt", "../etc/a.train.txt");
        assert!(Manifest::parse(&escape, "m.json").is_err());
    }
}
