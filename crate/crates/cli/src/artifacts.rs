//! Content-addressed outputs and run manifests.
//!
//! Output files are named `{command}-{role}-{hash}.{ext}` where `hash` is the
//! first 16 hex digits of the SHA-256 of the contents, so a results directory
//! only ever grows. Each run writes one manifest listing its outputs.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::commands::Command;

pub struct Artifact {
    pub role: String,
    pub ext: &'static str,
    pub bytes: Vec<u8>,
}

impl Artifact {
    pub fn new(role: &str, ext: &'static str, bytes: Vec<u8>) -> Self {
        Self {
            role: role.to_string(),
            ext,
            bytes,
        }
    }

    pub fn sha256(&self) -> String {
        hex::encode(Sha256::digest(&self.bytes))
    }

    pub fn file_name(&self, command: &str) -> String {
        format!(
            "{command}-{}-{}.{}",
            self.role,
            &self.sha256()[..16],
            self.ext
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputEntry {
    pub role: String,
    pub file: String,
    pub sha256: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub params: Command,
    pub seed: Option<u64>,
    pub version: String,
    pub started_at: String,
    pub finished_at: String,
    pub threads: usize,
    pub outputs: Vec<OutputEntry>,
}

/// Writes the artifacts (skipping names that already exist, which by
/// construction hold the same bytes) and returns their manifest entries.
pub fn write_outputs(
    dir: &Path,
    command: &str,
    artifacts: &[Artifact],
) -> Result<Vec<OutputEntry>> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut entries = Vec::with_capacity(artifacts.len());
    for a in artifacts {
        let name = a.file_name(command);
        let path = dir.join(&name);
        if !path.exists() {
            fs::write(&path, &a.bytes).with_context(|| format!("writing {}", path.display()))?;
        }
        entries.push(OutputEntry {
            role: a.role.clone(),
            file: name,
            sha256: a.sha256(),
        });
    }
    Ok(entries)
}

/// Stores the manifest under a fresh name; never overwrites.
pub fn write_manifest(dir: &Path, manifest: &RunManifest) -> Result<PathBuf> {
    let text = serde_json::to_string_pretty(manifest)? + "\n";
    let stamp = manifest.started_at.replace([':', '-'], "");
    let digest = &hex::encode(Sha256::digest(text.as_bytes()))[..8];
    for n in 0.. {
        let suffix = if n == 0 {
            String::new()
        } else {
            format!("-{n}")
        };
        let path = dir.join(format!(
            "manifest-{}-{stamp}-{digest}{suffix}.json",
            manifest.command
        ));
        if !path.exists() {
            fs::write(&path, &text).with_context(|| format!("writing {}", path.display()))?;
            return Ok(path);
        }
    }
    unreachable!()
}

pub fn read_manifest(path: &Path) -> Result<RunManifest> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading manifest {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing manifest {}", path.display()))
}

/// Differences between recorded outputs and a fresh run, as readable lines.
pub fn compare(recorded: &[OutputEntry], fresh: &[Artifact], command: &str) -> Result<Vec<String>> {
    if recorded.len() != fresh.len() {
        bail!(
            "manifest lists {} outputs, replay produced {}",
            recorded.len(),
            fresh.len()
        );
    }
    let mut diffs = Vec::new();
    for (r, a) in recorded.iter().zip(fresh) {
        let sha = a.sha256();
        if r.role != a.role || r.sha256 != sha {
            diffs.push(format!(
                "{}: recorded {} ({}), replay {} ({})",
                r.role,
                r.file,
                r.sha256,
                a.file_name(command),
                sha
            ));
        }
    }
    Ok(diffs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_are_content_addressed() {
        let a = Artifact::new("report", "csv", b"x,y\n1,2\n".to_vec());
        let b = Artifact::new("report", "csv", b"x,y\n1,3\n".to_vec());
        assert_ne!(a.file_name("lattice"), b.file_name("lattice"));
        assert_eq!(
            a.file_name("lattice"),
            Artifact::new("report", "csv", a.bytes.clone()).file_name("lattice")
        );
        assert!(a.file_name("lattice").starts_with("lattice-report-"));
    }
}
