//! Artifact bookkeeping: every file a run writes is hashed and listed in
//! `bundle.json` next to the resolved configuration.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::{CliError, Result};

pub const BUNDLE_FILE: &str = "bundle.json";
pub const SCHEMA_VERSION: &str = "v1";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Artifact {
    /// Relative to the output directory, `/`-separated.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultBundle {
    pub schema_version: String,
    pub inputs: RunConfig,
    pub artifacts: Vec<Artifact>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Writes files below one directory and remembers what it wrote.
#[derive(Debug)]
pub struct ArtifactWriter {
    root: PathBuf,
    written: Vec<Artifact>,
}

impl ArtifactWriter {
    pub fn new(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        fs::create_dir_all(&root).map_err(|e| CliError::io(&root, e))?;
        Ok(Self {
            root,
            written: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn write(&mut self, rel: &str, bytes: impl AsRef<[u8]>) -> Result<()> {
        let path = self.root.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
        }
        fs::write(&path, bytes.as_ref()).map_err(|e| CliError::io(&path, e))?;
        self.record(rel)
    }

    /// Hashes a file that something else already wrote below the root.
    pub fn record(&mut self, rel: &str) -> Result<()> {
        let path = self.root.join(rel);
        let bytes = fs::read(&path).map_err(|e| CliError::io(&path, e))?;
        self.written.retain(|a| a.path != rel);
        self.written.push(Artifact {
            path: rel.to_string(),
            sha256: sha256_hex(&bytes),
            bytes: bytes.len() as u64,
        });
        Ok(())
    }

    pub fn artifacts(&self) -> &[Artifact] {
        &self.written
    }

    /// Writes `bundle.json` and returns the bundle.
    pub fn finish(mut self, inputs: RunConfig) -> Result<ResultBundle> {
        self.written.sort_by(|a, b| a.path.cmp(&b.path));
        let bundle = ResultBundle {
            schema_version: SCHEMA_VERSION.to_string(),
            inputs,
            artifacts: self.written,
        };
        let text = serde_json::to_string_pretty(&bundle).map_err(|e| CliError::config(e.to_string()))? + "\n";
        let path = self.root.join(BUNDLE_FILE);
        fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
        Ok(bundle)
    }
}

/// Checks that every listed artifact exists with the recorded hash.
/// Returns the paths that are missing or differ.
pub fn verify_bundle(dir: &Path) -> Result<Vec<String>> {
    let path = dir.join(BUNDLE_FILE);
    let text = fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
    let bundle: ResultBundle = serde_json::from_str(&text).map_err(|e| {
        levlab_core::Error::schema(format!("{}:{}:{}", path.display(), e.line(), e.column()), e.to_string())
    })?;
    Ok(bundle
        .artifacts
        .iter()
        .filter(|a| match fs::read(dir.join(&a.path)) {
            Ok(bytes) => sha256_hex(&bytes) != a.sha256 || bytes.len() as u64 != a.bytes,
            Err(_) => true,
        })
        .map(|a| a.path.clone())
        .collect())
}
