//! Atomic stage outputs and their manifests.

use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

pub const MANIFEST_FILE: &str = "manifest.json";

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn hash_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    Ok(sha256_hex(&bytes))
}

/// Written next to every stage's outputs. Contains no timestamps or absolute
/// paths so that identical runs produce identical bytes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub seeds: BTreeMap<String, u64>,
    /// Content hash of each input, keyed by role.
    pub inputs: BTreeMap<String, String>,
    /// Content hash of each output, keyed by path relative to the stage dir.
    pub outputs: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "serde_json::Map::is_empty")]
    pub summary: serde_json::Map<String, serde_json::Value>,
}

/// Collects the files of one stage, each written atomically.
#[derive(Debug)]
pub struct StageWriter {
    dir: PathBuf,
    command: String,
    manifest_name: String,
    inputs: BTreeMap<String, String>,
    outputs: BTreeMap<String, String>,
    summary: serde_json::Map<String, serde_json::Value>,
}

impl StageWriter {
    pub fn new(root: &Path, stage: &str) -> Result<Self> {
        let dir = root.join(stage);
        std::fs::create_dir_all(&dir).map_err(|e| CliError::data(format!("{}: {e}", dir.display())))?;
        Ok(StageWriter {
            dir,
            command: stage.to_owned(),
            manifest_name: MANIFEST_FILE.to_owned(),
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
            summary: serde_json::Map::new(),
        })
    }

    pub fn with_manifest_name(mut self, name: impl Into<String>) -> Self {
        self.manifest_name = name.into();
        self
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn input(&mut self, role: &str, path: &Path) -> Result<()> {
        let h = hash_file(path)?;
        self.inputs.insert(role.to_owned(), h);
        Ok(())
    }

    pub fn summary(&mut self, key: &str, value: impl Serialize) -> Result<()> {
        let v = serde_json::to_value(value).map_err(CliError::data)?;
        self.summary.insert(key.to_owned(), v);
        Ok(())
    }

    pub fn write(&mut self, rel: &str, bytes: &[u8]) -> Result<()> {
        let path = self.dir.join(rel);
        write_atomic(&path, bytes)?;
        self.outputs.insert(rel.to_owned(), sha256_hex(bytes));
        Ok(())
    }

    pub fn write_json(&mut self, rel: &str, value: &impl Serialize) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(value).map_err(CliError::data)?;
        bytes.push(b'\n');
        self.write(rel, &bytes)
    }

    pub fn write_lines<'a>(&mut self, rel: &str, lines: impl IntoIterator<Item = impl std::fmt::Display + 'a>) -> Result<()> {
        let mut text = String::new();
        for l in lines {
            use std::fmt::Write as _;
            writeln!(text, "{l}").expect("write to string");
        }
        self.write(rel, text.as_bytes())
    }

    pub fn finish(self, seeds: BTreeMap<String, u64>) -> Result<Manifest> {
        let manifest = Manifest {
            command: self.command,
            version: env!("CARGO_PKG_VERSION").to_owned(),
            seeds,
            inputs: self.inputs,
            outputs: self.outputs,
            summary: self.summary,
        };
        let mut bytes = serde_json::to_vec_pretty(&manifest).map_err(CliError::data)?;
        bytes.push(b'\n');
        write_atomic(&self.dir.join(&self.manifest_name), &bytes)?;
        Ok(manifest)
    }
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let err = |e: std::io::Error| CliError::data(format!("{}: {e}", path.display()));
    let dir = path.parent().unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).map_err(err)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(err)?;
    tmp.write_all(bytes).map_err(err)?;
    tmp.as_file().sync_all().map_err(err)?;
    tmp.persist(path).map_err(|e| err(e.error))?;
    Ok(())
}
