//! Run manifests: config snapshot, stage timings and SHA-256 digests of
//! every input and output file.

use std::fs::File;
use std::io::Read;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub role: String,
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    pub millis: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config: serde_json::Value,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    pub timings: Vec<StageTiming>,
}

pub fn sha256_file(path: &Path) -> CliResult<(String, u64)> {
    let mut file = File::open(path).map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))?;
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    let mut total = 0u64;
    loop {
        let n = file
            .read(&mut buf)
            .map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
        total += n as u64;
    }
    Ok((hex::encode(hasher.finalize()), total))
}

fn digest(role: &str, path: &Path) -> CliResult<FileDigest> {
    let (sha256, bytes) = sha256_file(path)?;
    Ok(FileDigest {
        role: role.to_string(),
        path: path.display().to_string(),
        sha256,
        bytes,
    })
}

impl RunManifest {
    pub fn new(command: &str, config: &impl Serialize) -> Self {
        RunManifest {
            tool: "rowcrop".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config: serde_json::to_value(config).unwrap_or(serde_json::Value::Null),
            inputs: Vec::new(),
            outputs: Vec::new(),
            timings: Vec::new(),
        }
    }

    pub fn add_input(&mut self, role: &str, path: &Path) -> CliResult<()> {
        self.inputs.push(digest(role, path)?);
        Ok(())
    }

    pub fn add_output(&mut self, role: &str, path: &Path) -> CliResult<()> {
        self.outputs.push(digest(role, path)?);
        Ok(())
    }

    pub fn time<T>(&mut self, stage: &str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        self.timings.push(StageTiming {
            stage: stage.into(),
            millis: start.elapsed().as_secs_f64() * 1e3,
        });
        out
    }

    pub fn output(&self, role: &str) -> Option<&FileDigest> {
        self.outputs.iter().find(|d| d.role == role)
    }

    pub fn write(&self, path: &Path) -> CliResult<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| CliError::validation(e.to_string()))?;
        std::fs::write(path, text + "\n").map_err(|e| CliError::input(format!("cannot write {}: {e}", path.display())))
    }

    pub fn read(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
    }

    /// Files whose current digest differs from the recorded one.
    pub fn stale_files(&self) -> Vec<String> {
        self.inputs
            .iter()
            .chain(&self.outputs)
            .filter(|d| sha256_file(Path::new(&d.path)).map(|(h, _)| h != d.sha256).unwrap_or(true))
            .map(|d| d.path.clone())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_digest_and_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("abc.txt");
        std::fs::write(&file, "abc").unwrap();
        let (h, n) = sha256_file(&file).unwrap();
        assert_eq!(h, "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
        assert_eq!(n, 3);

        let mut m = RunManifest::new("segment", &serde_json::json!({"threshold": 0.08}));
        m.add_output("mask", &file).unwrap();
        let x = m.time("work", || 2 + 2);
        assert_eq!(x, 4);
        let path = dir.path().join("manifest.json");
        m.write(&path).unwrap();
        assert_eq!(RunManifest::read(&path).unwrap(), m);
        assert!(m.stale_files().is_empty());
        std::fs::write(&file, "abd").unwrap();
        assert_eq!(m.stale_files().len(), 1);
    }
}
