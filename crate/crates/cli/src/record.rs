use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Bumped whenever a CSV header or column meaning changes.
pub const CSV_SCHEMA_VERSION: u32 = 1;
pub const RECORD_FILE: &str = "run.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    /// Relative to the output directory.
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub tool: String,
    pub version: String,
    pub command: String,
    /// Parsed configuration as run, flag overrides included.
    pub config: serde_json::Value,
    pub overrides: serde_json::Value,
    /// SHA-256 of the effective model serialized as JSON.
    pub model_hash: Option<String>,
    pub seeds: Vec<u64>,
    pub rng: Option<String>,
    pub csv_schema_version: u32,
    pub started: String,
    pub finished: String,
    pub files: Vec<FileEntry>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

/// Collects the files a run writes so the record can list them.
#[derive(Debug)]
pub struct OutputSet {
    pub dir: PathBuf,
    pub files: Vec<PathBuf>,
}

impl OutputSet {
    pub fn create(dir: &Path) -> io::Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self { dir: dir.to_path_buf(), files: Vec::new() })
    }

    pub fn write(&mut self, name: &str, contents: &[u8]) -> io::Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, contents)?;
        if !self.files.iter().any(|f| f == Path::new(name)) {
            self.files.push(PathBuf::from(name));
        }
        Ok(())
    }

    pub fn manifest(&self) -> io::Result<Vec<FileEntry>> {
        self.files
            .iter()
            .map(|name| {
                let bytes = fs::read(self.dir.join(name))?;
                Ok(FileEntry {
                    path: name.to_string_lossy().into_owned(),
                    bytes: bytes.len() as u64,
                    sha256: sha256_hex(&bytes),
                })
            })
            .collect()
    }
}

/// Check every manifest entry against the files on disk.
pub fn verify_manifest(dir: &Path, record: &RunRecord) -> io::Result<Vec<String>> {
    let mut problems = Vec::new();
    for f in &record.files {
        match fs::read(dir.join(&f.path)) {
            Ok(bytes) => {
                if bytes.len() as u64 != f.bytes || sha256_hex(&bytes) != f.sha256 {
                    problems.push(format!("{} does not match its manifest entry", f.path));
                }
            }
            Err(e) => problems.push(format!("{}: {e}", f.path)),
        }
    }
    Ok(problems)
}
