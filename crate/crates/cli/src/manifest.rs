//! Run manifests and atomic output files.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

#[derive(Debug, Serialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

/// Everything needed to repeat a command: its resolved configuration, seeds
/// and input digests, plus provenance.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub started_at: String,
    pub finished_at: String,
    pub config: Map<String, Value>,
    pub seeds: Vec<u64>,
    pub inputs: Vec<InputDigest>,
    pub outputs: Vec<String>,
}

pub fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

pub fn digest_file(path: &Path) -> CliResult<InputDigest> {
    let bytes = std::fs::read(path).map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
    Ok(InputDigest {
        path: path.display().to_string(),
        sha256: hex::encode(Sha256::digest(&bytes)),
    })
}

/// Files written by one command. Each write goes to a temporary file in the
/// target directory and is renamed into place. If the command fails,
/// [`Outputs::discard`] removes what was already written.
pub struct Outputs {
    written: Vec<PathBuf>,
    created_dir: Option<PathBuf>,
}

impl Outputs {
    pub fn new() -> Self {
        Self {
            written: Vec::new(),
            created_dir: None,
        }
    }

    /// Creates `dir` if needed, remembering whether it was created here.
    pub fn ensure_dir(&mut self, dir: &Path) -> CliResult<()> {
        if !dir.exists() {
            std::fs::create_dir_all(dir)
                .map_err(|e| CliError::Internal(format!("cannot create {}: {e}", dir.display())))?;
            self.created_dir = Some(dir.to_path_buf());
        }
        Ok(())
    }

    pub fn write(&mut self, path: &Path, contents: &[u8]) -> CliResult<()> {
        write_atomic(path, contents)?;
        self.written.push(path.to_path_buf());
        Ok(())
    }

    pub fn write_json(&mut self, path: &Path, value: &impl Serialize) -> CliResult<()> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Internal(e.to_string()))?;
        text.push('\n');
        self.write(path, text.as_bytes())
    }

    pub fn names(&self) -> Vec<String> {
        self.written.iter().map(|p| p.display().to_string()).collect()
    }

    pub fn discard(self) {
        for path in &self.written {
            let _ = std::fs::remove_file(path);
        }
        if let Some(dir) = &self.created_dir {
            let _ = std::fs::remove_dir(dir);
        }
    }
}

pub fn write_atomic(path: &Path, contents: &[u8]) -> CliResult<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let fail = |e: std::io::Error| CliError::Internal(format!("cannot write {}: {e}", path.display()));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(fail)?;
    tmp.write_all(contents).map_err(fail)?;
    tmp.as_file().sync_all().map_err(fail)?;
    tmp.persist(path).map_err(|e| fail(e.error))?;
    Ok(())
}

/// Manifest path for a single-file output: `out.csv` -> `out.manifest.json`.
pub fn sibling_manifest(output: &Path) -> PathBuf {
    let stem = output
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    output.with_file_name(format!("{stem}.manifest.json"))
}

/// Name a JSON output uses to point at its manifest (relative to the output).
pub fn manifest_ref(manifest: &Path) -> Value {
    Value::String(
        manifest
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default(),
    )
}
