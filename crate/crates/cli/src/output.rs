//! Artifact writing and the run manifest.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::OutputFlags;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    /// Relative to the output directory.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config_path: Option<String>,
    /// The config file exactly as read.
    pub config: String,
    pub wall_time_seconds: f64,
    pub exit_code: i32,
    pub files: Vec<FileEntry>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Collects files written into one output directory.
pub struct Artifacts {
    dir: PathBuf,
    flags: OutputFlags,
    files: Vec<FileEntry>,
}

impl Artifacts {
    pub fn create(dir: &Path, flags: OutputFlags) -> std::io::Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self { dir: dir.to_path_buf(), flags, files: Vec::new() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn write(&mut self, name: &str, content: &[u8]) -> std::io::Result<()> {
        fs::write(self.dir.join(name), content)?;
        self.files.retain(|f| f.path != name);
        self.files.push(FileEntry { path: name.to_string(), sha256: sha256_hex(content), bytes: content.len() as u64 });
        Ok(())
    }

    pub fn text(&mut self, name: &str, content: &str) -> std::io::Result<()> {
        self.write(name, content.as_bytes())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> std::io::Result<()> {
        let mut s = serde_json::to_string_pretty(value).map_err(std::io::Error::other)?;
        s.push('\n');
        self.text(name, &s)
    }

    /// Writes an SVG unless plots are disabled.
    pub fn svg(&mut self, name: &str, content: &str) -> std::io::Result<()> {
        if !self.flags.svg {
            return Ok(());
        }
        if self.flags.svg_timestamp {
            let secs = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
            let stamped = match content.split_once('\n') {
                Some((head, rest)) => format!("{head}\n<!-- generated at unix time {secs} -->\n{rest}"),
                None => format!("{content}\n<!-- generated at unix time {secs} -->\n"),
            };
            return self.text(name, &stamped);
        }
        self.text(name, content)
    }

    pub fn files(&self) -> &[FileEntry] {
        &self.files
    }

    pub fn finish(self, mut manifest: RunManifest) -> std::io::Result<RunManifest> {
        manifest.files = self.files;
        let mut s = serde_json::to_string_pretty(&manifest).map_err(std::io::Error::other)?;
        s.push('\n');
        fs::write(self.dir.join(MANIFEST_FILE), s)?;
        Ok(manifest)
    }
}

/// Checks every manifest entry against the file on disk.
pub fn verify_manifest(dir: &Path) -> Result<RunManifest, String> {
    let text = fs::read_to_string(dir.join(MANIFEST_FILE)).map_err(|e| format!("manifest: {e}"))?;
    let m: RunManifest = serde_json::from_str(&text).map_err(|e| format!("manifest: {e}"))?;
    for f in &m.files {
        let bytes = fs::read(dir.join(&f.path)).map_err(|e| format!("{}: {e}", f.path))?;
        if sha256_hex(&bytes) != f.sha256 || bytes.len() as u64 != f.bytes {
            return Err(format!("{}: digest mismatch", f.path));
        }
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_digest() {
        assert_eq!(sha256_hex(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }
}
