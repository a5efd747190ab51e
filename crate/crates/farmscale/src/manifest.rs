//! Record of one command invocation and the files it produced.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Artifact {
    /// Relative to the output directory.
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config: Option<PathBuf>,
    pub seeds: Vec<u64>,
    pub policy: Option<String>,
    pub out_dir: PathBuf,
    pub artifacts: Vec<Artifact>,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| HarnessError::io(path, e))?;
    Ok(format!("{:x}", Sha256::digest(&bytes)))
}

impl RunManifest {
    pub fn new(command: &str, config: Option<&Path>, out_dir: &Path) -> Self {
        RunManifest {
            command: command.into(),
            config: config.map(Path::to_path_buf),
            seeds: Vec::new(),
            policy: None,
            out_dir: out_dir.to_path_buf(),
            artifacts: Vec::new(),
        }
    }

    /// Hashes `name` inside the output directory and records it.
    pub fn add(&mut self, name: &str) -> Result<()> {
        let sha256 = sha256_file(&self.out_dir.join(name))?;
        self.artifacts.push(Artifact { path: name.into(), sha256 });
        Ok(())
    }

    pub fn write(&self) -> Result<PathBuf> {
        let path = self.out_dir.join("manifest.json");
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(&path, text + "\n").map_err(|e| HarnessError::io(&path, e))?;
        Ok(path)
    }

    /// Names of recorded artifacts whose current checksum differs.
    pub fn verify(&self) -> Result<Vec<String>> {
        let mut changed = Vec::new();
        for a in &self.artifacts {
            if sha256_file(&self.out_dir.join(&a.path))? != a.sha256 {
                changed.push(a.path.clone());
            }
        }
        Ok(changed)
    }
}
