//! Run manifest: records input files and their content hashes so schedule
//! and simulate invocations can detect input drift.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputFile {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub inputs: Vec<InputFile>,
    pub config: String,
}

pub fn hash_file(path: &Path) -> std::io::Result<String> {
    let bytes = std::fs::read(path)?;
    let digest = Sha256::digest(&bytes);
    Ok(hex::encode(digest))
}

impl RunManifest {
    pub fn collect(paths: &[&Path], config: String) -> std::io::Result<RunManifest> {
        let mut inputs = Vec::new();
        for p in paths {
            inputs.push(InputFile {
                path: p.display().to_string(),
                sha256: hash_file(p)?,
            });
        }
        Ok(RunManifest {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            inputs,
            config,
        })
    }

    /// True when every recorded input still hashes to the same value.
    pub fn verify(&self) -> std::io::Result<bool> {
        for input in &self.inputs {
            if hash_file(Path::new(&input.path))? != input.sha256 {
                return Ok(false);
            }
        }
        Ok(true)
    }
}
