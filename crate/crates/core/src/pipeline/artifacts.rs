//! Stage stamps. Each stage records the hash of the configuration that
//! produced it and a digest of every file it wrote; consumers refuse
//! artifacts whose stamp disagrees with the current configuration or
//! contents.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

/// Writes through a sibling temporary file and a rename, so readers never
/// observe a partially written file.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".partial");
    let tmp = PathBuf::from(tmp);
    std::fs::write(&tmp, contents).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stamp {
    pub stage: String,
    pub config_hash: String,
    /// File name to SHA-256 of its contents.
    pub artifacts: BTreeMap<String, String>,
}

fn stamp_path(dir: &Path, stage: &str) -> PathBuf {
    dir.join(format!("{stage}.stamp.json"))
}

/// Collects a stage's outputs and writes them with a stamp at the end.
pub struct StageWriter<'a> {
    dir: &'a Path,
    stamp: Stamp,
}

impl<'a> StageWriter<'a> {
    /// Drops any previous stamp first so an interrupted rerun cannot leave
    /// an old stamp vouching for new files.
    pub fn begin(dir: &'a Path, stage: &str, config_hash: &str) -> Result<Self> {
        let old = stamp_path(dir, stage);
        if old.exists() {
            std::fs::remove_file(&old).map_err(|e| Error::io(&old, e))?;
        }
        Ok(StageWriter {
            dir,
            stamp: Stamp {
                stage: stage.to_string(),
                config_hash: config_hash.to_string(),
                artifacts: BTreeMap::new(),
            },
        })
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<PathBuf> {
        let path = self.dir.join(name);
        write_atomic(&path, contents.as_bytes())?;
        self.stamp
            .artifacts
            .insert(name.to_string(), sha256_hex(contents.as_bytes()));
        Ok(path)
    }

    pub fn finish(self) -> Result<Stamp> {
        let json = serde_json::to_string_pretty(&self.stamp).expect("stamp serializes") + "\n";
        write_atomic(&stamp_path(self.dir, &self.stamp.stage), json.as_bytes())?;
        Ok(self.stamp)
    }
}

/// Checks that `stage` ran under `config_hash` and that its files are
/// unchanged.
pub fn verify(dir: &Path, stage: &str, config_hash: &str) -> Result<Stamp> {
    let stale = |reason: String| Error::StaleArtifact {
        artifact: stage.to_string(),
        reason,
    };
    let path = stamp_path(dir, stage);
    let text = std::fs::read_to_string(&path).map_err(|_| stale("stage has not been run".into()))?;
    let stamp: Stamp = serde_json::from_str(&text).map_err(|e| stale(format!("unreadable stamp: {e}")))?;
    if stamp.config_hash != config_hash {
        return Err(stale("produced under a different configuration".into()));
    }
    for (name, digest) in &stamp.artifacts {
        let p = dir.join(name);
        let bytes = std::fs::read(&p).map_err(|_| Error::StaleArtifact {
            artifact: name.clone(),
            reason: "file is missing".into(),
        })?;
        if &sha256_hex(&bytes) != digest {
            return Err(Error::StaleArtifact {
                artifact: name.clone(),
                reason: "contents changed since the stage ran".into(),
            });
        }
    }
    Ok(stamp)
}

/// Merges one stage's wall-clock seconds into `timings.json`.
pub fn record_timing(dir: &Path, stage: &str, seconds: f64) -> Result<BTreeMap<String, f64>> {
    let path = dir.join("timings.json");
    let mut all: BTreeMap<String, f64> = std::fs::read_to_string(&path)
        .ok()
        .and_then(|t| serde_json::from_str(&t).ok())
        .unwrap_or_default();
    all.insert(stage.to_string(), seconds);
    let json = serde_json::to_string_pretty(&all).expect("timings serialize") + "\n";
    write_atomic(&path, json.as_bytes())?;
    Ok(all)
}

pub fn read_timings(dir: &Path) -> BTreeMap<String, f64> {
    std::fs::read_to_string(dir.join("timings.json"))
        .ok()
        .and_then(|t| serde_json::from_str(&t).ok())
        .unwrap_or_default()
}
