//! Run manifests: what was run, with which inputs, and the hash of every
//! file it wrote.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{AppError, AppResult};

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileRecord {
    pub name: String,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub subcommand: String,
    /// Arguments after the program name, without `--out`.
    pub args: Vec<String>,
    /// Working directory the arguments are relative to.
    pub cwd: PathBuf,
    pub config: Option<PathBuf>,
    pub preset: String,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub files: Vec<FileRecord>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// A named output file held in memory until the run succeeds.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OutputFile {
    pub name: String,
    pub bytes: Vec<u8>,
}

/// Writes `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> AppResult<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| AppError::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| AppError::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| AppError::io(path, e))?;
    tmp.persist(path).map_err(|e| AppError::io(path, e.error))?;
    Ok(())
}

/// Writes every output, then the manifest listing their hashes.
pub fn write_run(out_dir: &Path, files: &[OutputFile], mut manifest: RunManifest) -> AppResult<RunManifest> {
    fs::create_dir_all(out_dir).map_err(|e| AppError::io(out_dir, e))?;
    manifest.files.clear();
    for f in files {
        write_atomic(&out_dir.join(&f.name), &f.bytes)?;
        manifest.files.push(FileRecord { name: f.name.clone(), sha256: sha256_hex(&f.bytes) });
    }
    let mut text = serde_json::to_vec_pretty(&manifest).expect("manifest serialises");
    text.push(b'\n');
    write_atomic(&out_dir.join(MANIFEST_NAME), &text)?;
    Ok(manifest)
}

pub fn read_manifest(path: &Path) -> AppResult<RunManifest> {
    let text = fs::read_to_string(path).map_err(|e| AppError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| AppError::parse(&path.display().to_string(), e.line(), e.to_string()))
}

/// Names of files whose hash differs from the manifest or that are missing.
pub fn mismatches(expected: &RunManifest, dir: &Path) -> Vec<String> {
    expected
        .files
        .iter()
        .filter(|f| fs::read(dir.join(&f.name)).map_or(true, |b| sha256_hex(&b) != f.sha256))
        .map(|f| f.name.clone())
        .collect()
}
