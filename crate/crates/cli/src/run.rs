//! Run directories and their manifests.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Serialize)]
struct InputRecord {
    path: String,
    sha256: String,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    /// Hash of the effective configuration and the input file hashes.
    config_sha256: String,
    config: &'a serde_json::Value,
    seed: u64,
    inputs: Vec<InputRecord>,
    outputs: &'a [String],
}

/// Output directory of one command invocation.
pub struct RunDir {
    root: PathBuf,
    outputs: Vec<String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl RunDir {
    pub fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root).with_context(|| format!("cannot create run directory {}", root.display()))?;
        Ok(RunDir { root: root.to_path_buf(), outputs: Vec::new() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.path(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&path, bytes).with_context(|| format!("cannot write {}", path.display()))?;
        self.outputs.push(name.to_string());
        Ok(())
    }

    pub fn write_json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.write(name, &bytes)
    }

    /// Write the manifest last, so its presence marks a completed run.
    pub fn finish(mut self, command: &str, config: serde_json::Value, seed: u64, inputs: &[&Path]) -> Result<()> {
        let mut records = Vec::with_capacity(inputs.len());
        for p in inputs {
            let bytes = fs::read(p).with_context(|| format!("cannot read {}", p.display()))?;
            records.push(InputRecord { path: p.display().to_string(), sha256: sha256_hex(&bytes) });
        }
        let hashed = serde_json::json!({
            "command": command,
            "config": config,
            "seed": seed,
            "inputs": records.iter().map(|r| &r.sha256).collect::<Vec<_>>(),
        });
        let manifest = Manifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command,
            config_sha256: sha256_hex(&serde_json::to_vec(&hashed)?),
            config: &config,
            seed,
            inputs: records,
            outputs: &self.outputs,
        };
        let mut bytes = serde_json::to_vec_pretty(&manifest)?;
        bytes.push(b'\n');
        let path = self.path(MANIFEST);
        fs::write(&path, bytes).with_context(|| format!("cannot write {}", path.display()))?;
        self.outputs.clear();
        Ok(())
    }
}
