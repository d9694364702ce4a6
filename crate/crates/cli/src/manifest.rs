use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Serialize)]
pub struct InputDigest {
    pub path: PathBuf,
    pub sha256: String,
}

/// Provenance written next to every output file.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub argv: Vec<String>,
    /// Arguments that reproduce the run, with the resolved seed spelled out.
    pub rerun: Vec<String>,
    /// Working directory that relative paths are resolved against.
    pub cwd: Option<PathBuf>,
    pub params: serde_json::Value,
    pub seed: Option<u64>,
    pub inputs: Vec<InputDigest>,
    pub outputs: Vec<PathBuf>,
    pub timestamp: String,
    pub version: &'static str,
}

impl RunManifest {
    pub fn new(command: &str, argv: &[String], params: impl Serialize, seed: Option<u64>) -> Self {
        let mut rerun = argv.to_vec();
        let explicit = argv
            .iter()
            .any(|a| a == "--seed" || a.starts_with("--seed="));
        if let (Some(s), false) = (seed, explicit) {
            rerun.push("--seed".into());
            rerun.push(s.to_string());
        }
        Self {
            command: command.into(),
            argv: argv.to_vec(),
            rerun,
            cwd: std::env::current_dir().ok(),
            params: serde_json::to_value(params).unwrap_or(serde_json::Value::Null),
            seed,
            inputs: Vec::new(),
            outputs: Vec::new(),
            timestamp: chrono::Utc::now().to_rfc3339(),
            version: env!("CARGO_PKG_VERSION"),
        }
    }

    pub fn input(&mut self, path: &Path) -> std::io::Result<()> {
        let bytes = std::fs::read(path)?;
        self.inputs.push(InputDigest {
            path: path.to_path_buf(),
            sha256: hex::encode(Sha256::digest(&bytes)),
        });
        Ok(())
    }

    pub fn output(&mut self, path: &Path) {
        self.outputs.push(path.to_path_buf());
    }

    /// Writes `<first output>.manifest.json` and returns its path.
    pub fn write(&self) -> std::io::Result<Option<PathBuf>> {
        let Some(first) = self.outputs.first() else {
            return Ok(None);
        };
        let mut name = first.as_os_str().to_owned();
        name.push(".manifest.json");
        let path = PathBuf::from(name);
        let json = serde_json::to_string_pretty(self).map_err(std::io::Error::other)?;
        std::fs::write(&path, json + "\n")?;
        Ok(Some(path))
    }
}
