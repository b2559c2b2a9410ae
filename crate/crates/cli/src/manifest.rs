//! Run manifests: enough to regenerate every artifact of a run.

use std::fs::File;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

pub const MANIFEST_NAME: &str = "manifest.json";
pub const FORMAT: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: u32,
    pub tool: String,
    pub version: String,
    pub command: String,
    /// Fully resolved configuration; input paths are absolute.
    pub config: Value,
    pub threads: Option<usize>,
    pub inputs: Vec<FileDigest>,
    /// Output files relative to the output directory.
    pub outputs: Vec<FileDigest>,
    pub tolerances: Value,
}

pub fn digest(path: &Path, label: String) -> CliResult<FileDigest> {
    let mut f = File::open(path).map_err(|e| CliError::io(format!("{}: {e}", path.display())))?;
    let mut h = Sha256::new();
    let bytes = io::copy(&mut f, &mut h).map_err(|e| CliError::io(format!("{}: {e}", path.display())))?;
    Ok(FileDigest {
        path: label,
        sha256: format!("{:x}", h.finalize()),
        bytes,
    })
}

pub fn sha256_hex(data: &[u8]) -> String {
    format!("{:x}", Sha256::digest(data))
}
