//! Self-describing JSON envelopes around pipeline results.

use std::fs;
use std::path::Path;

use perfpipe_core::WindowPolicy;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

pub const TOOL: &str = "perfpipe";

/// An input file identified by name and content hash.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputFile {
    /// File name without directories.
    pub name: String,
    pub sha256: String,
}

impl InputFile {
    pub fn of(path: &Path) -> Result<InputFile> {
        let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
        Ok(InputFile {
            name: path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default(),
            sha256: sha256_hex(&bytes),
        })
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Everything needed to reproduce a result, followed by the result. No
/// timestamps or host details are recorded, so equal inputs give equal
/// bytes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope<T> {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub window: Option<WindowPolicy>,
    pub inputs: Vec<InputFile>,
    pub result: T,
}

impl<T> Envelope<T> {
    pub fn new(command: &str, seed: u64, window: Option<WindowPolicy>, inputs: Vec<InputFile>, result: T) -> Self {
        Envelope {
            tool: TOOL.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            seed,
            window,
            inputs,
            result,
        }
    }
}
