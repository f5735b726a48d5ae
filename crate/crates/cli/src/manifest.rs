//! Run manifests: resolved configuration, content hashes of every input and
//! output, and enough information to replay a run and compare its bytes.

use std::fs::File;
use std::io::Read;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

pub const TOOL: &str = "xgbias";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputHash {
    pub path: PathBuf,
    pub sha256: String,
    /// Files hashed under `path` when it is a directory (relative, sorted).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub files: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputHash {
    /// Relative to the output directory.
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub argv: Vec<String>,
    pub out_dir: PathBuf,
    pub config: Value,
    pub inputs: Vec<InputHash>,
    pub outputs: Vec<OutputHash>,
    pub status: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    pub threads: usize,
    pub duration_secs: f64,
    #[serde(default)]
    pub summary: Map<String, Value>,
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn sha256_bytes(bytes: &[u8]) -> String {
    hex(&Sha256::digest(bytes))
}

pub fn sha256_file(path: &Path) -> CliResult<String> {
    let mut f = File::open(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let mut h = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = f
            .read(&mut buf)
            .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        if n == 0 {
            break;
        }
        h.update(&buf[..n]);
    }
    Ok(hex(&h.finalize()))
}

impl InputHash {
    pub fn file(path: &Path) -> CliResult<Self> {
        Ok(InputHash {
            path: path.to_path_buf(),
            sha256: sha256_file(path)?,
            files: Vec::new(),
        })
    }

    /// Digest over `relative path NUL file digest` lines of the listed files.
    pub fn directory(root: &Path, files: Vec<String>) -> CliResult<Self> {
        let mut files = files;
        files.sort();
        files.dedup();
        let sha256 = dir_digest(root, &files)?;
        Ok(InputHash {
            path: root.to_path_buf(),
            sha256,
            files,
        })
    }

    /// `None` when the content still matches, otherwise a description.
    pub fn verify(&self) -> Option<String> {
        let now = if self.files.is_empty() {
            sha256_file(&self.path)
        } else {
            dir_digest(&self.path, &self.files)
        };
        match now {
            Ok(h) if h == self.sha256 => None,
            Ok(_) => Some(format!("{} changed since the recorded run", self.path.display())),
            Err(e) => Some(format!("{} is no longer readable: {e}", self.path.display())),
        }
    }
}

fn dir_digest(root: &Path, files: &[String]) -> CliResult<String> {
    let mut h = Sha256::new();
    for f in files {
        h.update(f.as_bytes());
        h.update([0u8]);
        h.update(sha256_file(&root.join(f))?.as_bytes());
        h.update(b"\n");
    }
    Ok(hex(&h.finalize()))
}

impl RunManifest {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config("manifest", format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::config("manifest", format!("{}: {e}", path.display())))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serialises") + "\n"
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_digest() {
        assert_eq!(
            sha256_bytes(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn tampering_is_detected() {
        let dir = tempfile::tempdir().unwrap();
        let f = dir.path().join("a.csv");
        std::fs::write(&f, "x\n1\n").unwrap();
        std::fs::create_dir(dir.path().join("events")).unwrap();
        std::fs::write(dir.path().join("events/1.json"), "[]").unwrap();
        let file = InputHash::file(&f).unwrap();
        let tree = InputHash::directory(dir.path(), vec!["events/1.json".into(), "a.csv".into()]).unwrap();
        assert!(file.verify().is_none() && tree.verify().is_none());
        std::fs::write(&f, "x\n2\n").unwrap();
        assert!(file.verify().is_some());
        assert!(tree.verify().is_some());
    }
}
