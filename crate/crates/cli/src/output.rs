use std::fs;
use std::path::Path;

use hyptimes_core::io::{write_atomic, Csv};
use serde::Serialize;

use crate::error::{CliError, Result};

/// A rendered output file, relative to the output directory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Artifact {
    pub name: String,
    pub bytes: Vec<u8>,
}

impl Artifact {
    pub fn csv(name: &str, csv: Csv) -> Self {
        Self { name: name.to_string(), bytes: csv.into_bytes() }
    }

    /// Pretty-printed JSON with a trailing newline.
    pub fn json(name: &str, value: &impl Serialize) -> Self {
        let mut bytes = serde_json::to_vec_pretty(value).expect("serializable summary");
        bytes.push(b'\n');
        Self { name: name.to_string(), bytes }
    }

    pub fn text(name: &str, text: String) -> Self {
        Self { name: name.to_string(), bytes: text.into_bytes() }
    }
}

/// Creates `dir` if needed and fails early when it cannot be written.
pub fn prepare_dir(dir: &Path) -> Result<()> {
    let io = |source| CliError::Io { path: dir.to_path_buf(), source };
    fs::create_dir_all(dir).map_err(io)?;
    let probe = dir.join(".hyptimes-write-probe");
    fs::write(&probe, b"").map_err(io)?;
    fs::remove_file(&probe).map_err(io)
}

/// Writes each artifact atomically into `dir`.
pub fn write_all(dir: &Path, artifacts: &[Artifact]) -> Result<()> {
    for a in artifacts {
        let path = dir.join(&a.name);
        write_atomic(&path, &a.bytes).map_err(|source| CliError::Io { path, source })?;
    }
    Ok(())
}
