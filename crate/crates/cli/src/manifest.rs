//! Run manifest: config hash, code version and per-task artifacts with
//! checksums. Tasks whose artifacts still match are skipped on resume.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const MANIFEST_SUFFIX: &str = ".manifest.json";
pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum TaskStatus {
    Done,
    Skipped { note: String },
    Failed { error: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Artifact {
    /// Relative to the run directory.
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskRecord {
    pub status: TaskStatus,
    pub artifacts: Vec<Artifact>,
    #[serde(default)]
    pub warnings: Vec<String>,
    pub wall_clock_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config_hash: String,
    pub code_version: String,
    pub tasks: BTreeMap<String, TaskRecord>,
}

pub fn sha256_file(path: &Path) -> Result<String, CliError> {
    let bytes = fs::read(path).map_err(CliError::io(path.display().to_string()))?;
    Ok(hex::encode(Sha256::digest(bytes)))
}

impl RunManifest {
    pub fn new(command: &str, config_hash: &str) -> Self {
        Self { command: command.into(), config_hash: config_hash.into(), code_version: CODE_VERSION.into(), tasks: BTreeMap::new() }
    }

    /// `<dir>/<command>.manifest.json`; each command keeps its own.
    pub fn path(dir: &Path, command: &str) -> PathBuf {
        dir.join(format!("{command}{MANIFEST_SUFFIX}"))
    }

    /// Manifest files directly inside `dir`, sorted by name.
    pub fn find(dir: &Path) -> Vec<PathBuf> {
        let mut found: Vec<PathBuf> = fs::read_dir(dir)
            .into_iter()
            .flatten()
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_file() && p.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.ends_with(MANIFEST_SUFFIX)))
            .collect();
        found.sort();
        found
    }

    pub fn load(dir: &Path, command: &str) -> Result<Option<Self>, CliError> {
        Self::load_file(&Self::path(dir, command))
    }

    pub fn load_file(path: &Path) -> Result<Option<Self>, CliError> {
        if !path.exists() {
            return Ok(None);
        }
        let text = fs::read_to_string(path).map_err(CliError::io(path.display().to_string()))?;
        Ok(Some(serde_json::from_str(&text)?))
    }

    /// Existing manifest for the same command, config and code version, or a
    /// fresh one.
    pub fn resume(dir: &Path, command: &str, config_hash: &str) -> Result<Self, CliError> {
        match Self::load(dir, command)? {
            Some(m) if m.command == command && m.config_hash == config_hash && m.code_version == CODE_VERSION => Ok(m),
            _ => Ok(Self::new(command, config_hash)),
        }
    }

    pub fn save(&self, dir: &Path) -> Result<(), CliError> {
        fs::create_dir_all(dir).map_err(CliError::io(dir.display().to_string()))?;
        let path = Self::path(dir, &self.command);
        let tmp = path.with_extension("json.tmp");
        fs::write(&tmp, serde_json::to_vec_pretty(self)?).map_err(CliError::io(tmp.display().to_string()))?;
        fs::rename(&tmp, &path).map_err(CliError::io(path.display().to_string()))
    }

    /// True when the task finished and every artifact still has its recorded
    /// checksum.
    pub fn is_complete(&self, task: &str, dir: &Path) -> bool {
        let Some(rec) = self.tasks.get(task) else {
            return false;
        };
        matches!(rec.status, TaskStatus::Done | TaskStatus::Skipped { .. })
            && rec.artifacts.iter().all(|a| sha256_file(&dir.join(&a.path)).is_ok_and(|h| h == a.sha256))
    }

    pub fn record(&mut self, task: &str, record: TaskRecord) {
        self.tasks.insert(task.into(), record);
    }

    /// Copy with wall-clock times zeroed, for comparing runs.
    pub fn without_timing(&self) -> Self {
        let mut m = self.clone();
        for rec in m.tasks.values_mut() {
            rec.wall_clock_s = 0.0;
        }
        m
    }
}

/// Writes files under a run directory and collects their checksums.
pub struct ArtifactWriter<'a> {
    dir: &'a Path,
    pub artifacts: Vec<Artifact>,
}

impl<'a> ArtifactWriter<'a> {
    pub fn new(dir: &'a Path) -> Self {
        Self { dir, artifacts: Vec::new() }
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(CliError::io(parent.display().to_string()))?;
        }
        fs::write(&path, bytes).map_err(CliError::io(path.display().to_string()))?;
        self.artifacts.push(Artifact { path: name.into(), sha256: hex::encode(Sha256::digest(bytes)) });
        Ok(())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.write(name, &bytes)
    }
}
