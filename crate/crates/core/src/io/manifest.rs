//! Run manifests: every CLI run records its inputs, config hash, and
//! outputs next to the artifacts. No timestamps, so reruns are
//! byte-identical when nothing changed.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// FNV-1a 64-bit.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

pub fn hash_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    Ok(format!("fnv1a:{:016x}", fnv1a64(&bytes)))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ManifestInput {
    pub path: String,
    pub hash: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub subcommand: String,
    pub config_hash: String,
    pub inputs: Vec<ManifestInput>,
    pub outputs: Vec<String>,
    pub params: serde_json::Value,
}

impl Manifest {
    pub fn new(subcommand: &str, config_json: &str) -> Manifest {
        Manifest {
            tool: "splatnav".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            subcommand: subcommand.into(),
            config_hash: format!("fnv1a:{:016x}", fnv1a64(config_json.as_bytes())),
            inputs: Vec::new(),
            outputs: Vec::new(),
            params: serde_json::Value::Null,
        }
    }

    pub fn add_input(&mut self, path: &Path) -> Result<()> {
        self.inputs.push(ManifestInput {
            path: path.display().to_string(),
            hash: hash_file(path)?,
        });
        Ok(())
    }

    pub fn add_output(&mut self, path: &Path) {
        self.outputs.push(path.display().to_string());
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self)
            .map_err(|e| Error::invalid("manifest", e.to_string()))?;
        std::fs::write(path, json).map_err(|e| Error::io(path.display().to_string(), e))
    }
}
