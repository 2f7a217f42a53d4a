//! Static-manifest hub access shared by datasets and checkpoints.
//!
//! A hub is any directory or static HTTP(S) host serving a JSON manifest
//! next to the files it lists. Every file is addressed relative to the
//! manifest and verified against its SHA-256 digest before it is kept.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

#[derive(Debug, thiserror::Error)]
pub enum HubError {
    #[error("fetching {url}: {message}")]
    Network { url: String, message: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("digest mismatch for {file}: expected {expected}, got {actual}")]
    DigestMismatch { file: String, expected: String, actual: String },
    #[error("invalid manifest {url}: {message}")]
    ManifestParse { url: String, message: String },
}

impl HubError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        HubError::Io { path: path.into(), source }
    }
}

/// Lowercase hex SHA-256 of `bytes`.
pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn is_remote(source: &str) -> bool {
    source.starts_with("http://") || source.starts_with("https://")
}

fn local_path(source: &str) -> &Path {
    Path::new(source.strip_prefix("file://").unwrap_or(source))
}

/// Read a manifest or file from a URL, a `file://` URL or a plain path.
pub fn fetch_bytes(source: &str) -> Result<Vec<u8>, HubError> {
    if is_remote(source) {
        let network = |message: String| HubError::Network { url: source.to_string(), message };
        let mut response = ureq::get(source).call().map_err(|e| network(e.to_string()))?;
        response
            .body_mut()
            .with_config()
            .limit(u64::MAX)
            .read_to_vec()
            .map_err(|e| network(e.to_string()))
    } else {
        let path = local_path(source);
        fs::read(path).map_err(|e| HubError::io(path, e))
    }
}

/// Resolve `relative` against the location of the manifest at `base`.
pub fn resolve(base: &str, relative: &str) -> String {
    if is_remote(base) {
        match base.rfind('/') {
            Some(i) => format!("{}/{}", &base[..i], relative.trim_start_matches('/')),
            None => relative.to_string(),
        }
    } else {
        let prefix = if base.starts_with("file://") { "file://" } else { "" };
        let dir = local_path(base).parent().unwrap_or(Path::new(""));
        format!("{prefix}{}", dir.join(relative).display())
    }
}

/// Check that the file at `path` hashes to `expected`.
pub fn verify_file(path: &Path, expected: &str) -> Result<(), HubError> {
    let bytes = fs::read(path).map_err(|e| HubError::io(path, e))?;
    let actual = sha256_hex(&bytes);
    if actual.eq_ignore_ascii_case(expected) {
        Ok(())
    } else {
        Err(HubError::DigestMismatch { file: path.display().to_string(), expected: expected.to_string(), actual })
    }
}

/// Write `bytes` to `dest` through a temporary sibling and a rename.
pub(crate) fn write_atomic(dest: &Path, bytes: &[u8]) -> Result<(), HubError> {
    if let Some(parent) = dest.parent() {
        fs::create_dir_all(parent).map_err(|e| HubError::io(parent, e))?;
    }
    let tmp = dest.with_extension(format!("partial-{}", std::process::id()));
    let mut file = fs::File::create(&tmp).map_err(|e| HubError::io(&tmp, e))?;
    file.write_all(bytes).map_err(|e| HubError::io(&tmp, e))?;
    file.sync_all().map_err(|e| HubError::io(&tmp, e))?;
    fs::rename(&tmp, dest).map_err(|e| HubError::io(dest, e))
}

/// Make sure `dest` holds the file at `source` with the given digest.
///
/// Returns `true` when a download happened and `false` when an existing
/// file already matched. A mismatching download is never written.
pub fn download_verified(source: &str, expected: &str, dest: &Path) -> Result<bool, HubError> {
    if dest.is_file() && verify_file(dest, expected).is_ok() {
        return Ok(false);
    }
    let bytes = fetch_bytes(source)?;
    let actual = sha256_hex(&bytes);
    if !actual.eq_ignore_ascii_case(expected) {
        return Err(HubError::DigestMismatch { file: source.to_string(), expected: expected.to_string(), actual });
    }
    write_atomic(dest, &bytes)?;
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sha256_of_known_input() {
        assert_eq!(sha256_hex(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }

    #[test]
    fn resolve_against_url_and_path() {
        assert_eq!(resolve("https://h.example/x/manifest.json", "a/b.txt"), "https://h.example/x/a/b.txt");
        assert_eq!(resolve("/srv/hub/manifest.json", "a/b.txt"), "/srv/hub/a/b.txt");
        assert_eq!(resolve("file:///srv/hub/manifest.json", "c"), "file:///srv/hub/c");
    }

    #[test]
    fn download_is_idempotent_and_verified() {
        let dir = tempfile::tempdir().unwrap();
        let src = dir.path().join("src.txt");
        fs::write(&src, b"payload").unwrap();
        let digest = sha256_hex(b"payload");
        let dest = dir.path().join("out/dest.txt");
        let src_str = src.to_str().unwrap();
        assert!(download_verified(src_str, &digest, &dest).unwrap());
        assert!(!download_verified(src_str, &digest, &dest).unwrap());
        let bad = download_verified(src_str, &sha256_hex(b"other"), &dir.path().join("x"));
        assert!(matches!(bad, Err(HubError::DigestMismatch { .. })));
        assert!(!dir.path().join("x").exists());
    }
}
