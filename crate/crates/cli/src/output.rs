//! Atomic file writes and per-output manifests.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use affistack::seed::content_hash;
use serde::Serialize;

use crate::CliError;

/// Write through a temporary sibling and rename into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = dir.join(format!(".{name}.tmp-{}", std::process::id()));
    fs::write(&tmp, contents).map_err(|e| io_err(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| io_err(path, e))?;
    Ok(())
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Data(format!("cannot write {}: {e}", path.display()))
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| CliError::Data(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

/// Provenance written next to every output file as `<file>.manifest.json`.
#[derive(Debug, Serialize)]
pub struct OutputManifest<'a> {
    pub command: &'a str,
    pub seed: Option<u64>,
    /// Identity of the work that produced the output; equal keys mean the
    /// output can be reused.
    pub cell_hash: Option<String>,
    pub inputs: BTreeMap<String, String>,
    pub output_hash: String,
    pub version: &'static str,
}

pub fn manifest_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    path.with_file_name(name)
}

/// Write `contents` to `path` and its manifest.
pub fn write_with_manifest(
    path: &Path,
    contents: &[u8],
    command: &str,
    seed: Option<u64>,
    cell_hash: Option<String>,
    inputs: BTreeMap<String, String>,
) -> Result<(), CliError> {
    write_atomic(path, contents)?;
    let manifest = OutputManifest {
        command,
        seed,
        cell_hash,
        inputs,
        output_hash: content_hash(contents),
        version: env!("CARGO_PKG_VERSION"),
    };
    write_atomic(&manifest_path(path), to_json(&manifest)?.as_bytes())
}

/// True when `path` and its manifest exist, the manifest carries `cell_hash`
/// and the file still matches the recorded output hash.
pub fn is_up_to_date(path: &Path, cell_hash: &str) -> bool {
    let (Ok(body), Ok(manifest)) = (fs::read(path), fs::read_to_string(manifest_path(path))) else {
        return false;
    };
    let Ok(m) = serde_json::from_str::<serde_json::Value>(&manifest) else {
        return false;
    };
    m["cell_hash"].as_str() == Some(cell_hash) && m["output_hash"].as_str() == Some(&content_hash(&body))
}
