use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Serialize)]
pub struct InputRecord {
    pub path: PathBuf,
    pub sha256: String,
}

/// Provenance record written next to every command's outputs.
#[derive(Serialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: String,
    pub config: serde_json::Value,
    pub inputs: Vec<InputRecord>,
    pub outputs: Vec<PathBuf>,
    pub wall_seconds: f64,
}

pub struct ManifestBuilder {
    manifest: RunManifest,
    start: Instant,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

impl ManifestBuilder {
    pub fn new(command: &str, config: impl Serialize) -> Result<Self> {
        Ok(ManifestBuilder {
            manifest: RunManifest {
                command: command.to_string(),
                tool_version: env!("CARGO_PKG_VERSION").to_string(),
                config: serde_json::to_value(config)?,
                inputs: Vec::new(),
                outputs: Vec::new(),
                wall_seconds: 0.0,
            },
            start: Instant::now(),
        })
    }

    /// Reads an input file, records its checksum and returns the bytes.
    pub fn read_input(&mut self, path: &Path) -> Result<Vec<u8>> {
        let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        self.manifest.inputs.push(InputRecord { path: path.to_path_buf(), sha256: sha256_hex(&bytes) });
        Ok(bytes)
    }

    pub fn read_input_text(&mut self, path: &Path) -> Result<String> {
        let bytes = self.read_input(path)?;
        String::from_utf8(bytes).with_context(|| format!("{} is not UTF-8", path.display()))
    }

    pub fn write_output(&mut self, path: &Path, bytes: &[u8]) -> Result<()> {
        fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))?;
        self.manifest.outputs.push(path.to_path_buf());
        Ok(())
    }

    pub fn finish(mut self, path: &Path) -> Result<()> {
        self.manifest.wall_seconds = self.start.elapsed().as_secs_f64();
        let json = serde_json::to_string_pretty(&self.manifest)?;
        fs::write(path, json + "\n").with_context(|| format!("writing manifest {}", path.display()))
    }
}

/// `foo.bin` gets `foo.bin.manifest.json`.
pub fn sidecar(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}
