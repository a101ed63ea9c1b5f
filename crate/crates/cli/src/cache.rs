//! On-disk cache of environment eigendecompositions.
//!
//! Each entry is `<key>.bin` (little-endian `f64` energies followed by the
//! column-major eigenvectors) plus `<key>.json` metadata. The key is the
//! SHA-256 of the canonical JSON of the chain parameters; the metadata also
//! records a hash of the assembled Hamiltonian so that a changed builder
//! invalidates old entries. Writers take `<key>.lock` exclusively, write to a
//! temporary file and rename it into place.

use std::fs::{self, File, OpenOptions};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use ethlab::eigensolver::{eigh_sparse, EigenDecomposition};
use ethlab::lattice::ChainConfig;
use ethlab::sparse::SparseHamiltonian;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const CACHE_ENV_VAR: &str = "ETHLAB_CACHE_DIR";

const FORMAT: &str = "ethlab-env-eig-v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheMeta {
    pub format: String,
    pub dim: usize,
    pub model_hash: String,
    pub params: ChainConfig,
    pub has_vectors: bool,
}

#[derive(Debug, Clone, Default)]
pub struct EigenCache {
    root: Option<PathBuf>,
}

pub fn env_key(chain: &ChainConfig) -> String {
    let canonical = serde_json::to_vec(&(FORMAT, chain)).expect("chain serializes");
    hex::encode(Sha256::digest(canonical))
}

/// Hash of the CSR arrays of `h`.
pub fn model_hash(h: &SparseHamiltonian) -> String {
    let mut hasher = Sha256::new();
    hasher.update((h.dim() as u64).to_le_bytes());
    for &o in h.row_offsets() {
        hasher.update((o as u64).to_le_bytes());
    }
    for &c in h.col_indices() {
        hasher.update((c as u64).to_le_bytes());
    }
    for &v in h.values() {
        hasher.update(v.to_le_bytes());
    }
    hex::encode(hasher.finalize())
}

impl EigenCache {
    /// A cache that never touches the disk.
    pub fn disabled() -> Self {
        Self { root: None }
    }

    pub fn at(root: impl Into<PathBuf>) -> Self {
        Self { root: Some(root.into()) }
    }

    /// Rooted at `$ETHLAB_CACHE_DIR` when set.
    pub fn from_env() -> Self {
        match std::env::var_os(CACHE_ENV_VAR) {
            Some(dir) if !dir.is_empty() => Self::at(dir),
            _ => Self::disabled(),
        }
    }

    pub fn root(&self) -> Option<&Path> {
        self.root.as_deref()
    }

    fn paths(&self, key: &str) -> Option<(PathBuf, PathBuf, PathBuf)> {
        let root = self.root.as_ref()?;
        Some((root.join(format!("{key}.bin")), root.join(format!("{key}.json")), root.join(format!("{key}.lock"))))
    }

    /// Decomposition of `h` for `chain`, loaded from the cache when a valid
    /// entry exists and stored after computing otherwise.
    pub fn env_decomposition(&self, chain: &ChainConfig, h: &SparseHamiltonian) -> Result<EigenDecomposition, CliError> {
        let key = env_key(chain);
        let hash = model_hash(h);
        if let Some(eig) = self.load(&key, &hash)? {
            return Ok(eig);
        }
        let eig = eigh_sparse(h)?;
        let meta = CacheMeta { format: FORMAT.into(), dim: h.dim(), model_hash: hash, params: chain.clone(), has_vectors: true };
        self.store(&key, &meta, &eig)?;
        Ok(eig)
    }

    /// `None` when the entry is missing or stale.
    pub fn load(&self, key: &str, expected_hash: &str) -> Result<Option<EigenDecomposition>, CliError> {
        let Some((bin, json, _)) = self.paths(key) else {
            return Ok(None);
        };
        let Ok(text) = fs::read_to_string(&json) else {
            return Ok(None);
        };
        let Ok(meta) = serde_json::from_str::<CacheMeta>(&text) else {
            return Ok(None);
        };
        if meta.format != FORMAT || meta.model_hash != expected_hash || !meta.has_vectors {
            return Ok(None);
        }
        let Ok(file) = File::open(&bin) else {
            return Ok(None);
        };
        let n = meta.dim;
        let expected_len = (n + n * n) * 8;
        if file.metadata().map(|m| m.len() as usize).unwrap_or(0) != expected_len {
            return Ok(None);
        }
        let mut bytes = Vec::with_capacity(expected_len);
        BufReader::new(file).read_to_end(&mut bytes).map_err(CliError::io(bin.display().to_string()))?;
        let mut values = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap()));
        let energies: Vec<f64> = values.by_ref().take(n).collect();
        let vectors: Vec<f64> = values.collect();
        Ok(EigenDecomposition::from_parts(energies, vectors).ok())
    }

    /// Skips silently when another writer holds the lock.
    pub fn store(&self, key: &str, meta: &CacheMeta, eig: &EigenDecomposition) -> Result<(), CliError> {
        let Some((bin, json, lock)) = self.paths(key) else {
            return Ok(());
        };
        let root = self.root.as_ref().unwrap();
        fs::create_dir_all(root).map_err(CliError::io(root.display().to_string()))?;
        if OpenOptions::new().write(true).create_new(true).open(&lock).is_err() {
            return Ok(());
        }
        let result = (|| {
            let tmp_bin = bin.with_extension("bin.tmp");
            {
                let mut w = BufWriter::new(File::create(&tmp_bin)?);
                for x in eig.energies().iter().chain(eig.vectors()) {
                    w.write_all(&x.to_le_bytes())?;
                }
                w.flush()?;
            }
            fs::rename(&tmp_bin, &bin)?;
            let tmp_json = json.with_extension("json.tmp");
            fs::write(&tmp_json, serde_json::to_vec_pretty(meta)?)?;
            fs::rename(&tmp_json, &json)
        })();
        let _ = fs::remove_file(&lock);
        result.map_err(CliError::io(format!("cache write {}", bin.display())))
    }
}
