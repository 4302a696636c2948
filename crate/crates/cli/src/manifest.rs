//! Run manifests and atomic output writing.
//!
//! Every invocation prints a manifest as the final stdout line: the
//! subcommand, its full parameter set, the seed, and a digest of every
//! artifact written.  The manifest carries no timestamps and excludes the
//! worker count, so identical manifests imply byte-identical outputs.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Serialize)]
pub struct OutputRecord {
    pub target: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub tool: &'static str,
    pub version: &'static str,
    pub subcommand: String,
    pub params: serde_json::Value,
    pub seed: u64,
    pub outputs: Vec<OutputRecord>,
}

pub struct Output {
    pub dest: Option<PathBuf>,
    pub bytes: Vec<u8>,
}

fn digest(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let out = hasher.finalize();
    out.iter().map(|b| format!("{b:02x}")).collect()
}

/// Write one artifact: to its file atomically (temp file in the same
/// directory, then rename), or to stdout when no path was given.
pub fn emit(output: &Output) -> std::io::Result<OutputRecord> {
    let record = OutputRecord {
        target: output
            .dest
            .as_ref()
            .map_or_else(|| "-".to_string(), |p| p.display().to_string()),
        bytes: output.bytes.len() as u64,
        sha256: digest(&output.bytes),
    };
    match &output.dest {
        Some(path) => {
            let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
            let mut tmp = tempfile::NamedTempFile::new_in(dir.unwrap_or(Path::new(".")))?;
            tmp.write_all(&output.bytes)?;
            tmp.persist(path).map_err(|e| e.error)?;
        }
        None => {
            std::io::stdout().write_all(&output.bytes)?;
        }
    }
    Ok(record)
}
