//! Line-oriented file I/O with line-numbered diagnostics and atomic writes.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::CliError;

/// Reads a JSONL file, attributing every parse failure to its line number.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, CliError> {
    let content = fs::read_to_string(path)
        .map_err(|e| CliError::Schema(format!("cannot read {}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (index, line) in content.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: T = serde_json::from_str(line).map_err(|e| {
            CliError::Schema(format!("{}:{}: {e}", path.display(), index + 1))
        })?;
        out.push(record);
    }
    Ok(out)
}

/// Writes a JSON document atomically: a temp file in the target directory is
/// persisted over the destination, so an interrupted run never leaves a
/// truncated report behind.
pub fn write_json_atomic<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let body = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Internal(format!("cannot serialize output: {e}")))?;
    write_atomic(path, body.as_bytes())
}

/// Writes JSONL atomically, one serialized value per line.
pub fn write_jsonl_atomic<T: Serialize>(path: &Path, values: &[T]) -> Result<(), CliError> {
    let mut body = String::new();
    for value in values {
        body.push_str(
            &serde_json::to_string(value)
                .map_err(|e| CliError::Internal(format!("cannot serialize output: {e}")))?,
        );
        body.push('\n');
    }
    write_atomic(path, body.as_bytes())
}

/// Writes plain text atomically.
pub fn write_text_atomic(path: &Path, text: &str) -> Result<(), CliError> {
    write_atomic(path, text.as_bytes())
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let mut tmp = match dir {
        Some(dir) => tempfile::NamedTempFile::new_in(dir),
        None => tempfile::NamedTempFile::new_in("."),
    }
    .map_err(|e| CliError::Internal(format!("cannot create temp file: {e}")))?;
    tmp.write_all(bytes)
        .map_err(|e| CliError::Internal(format!("cannot write output: {e}")))?;
    tmp.persist(path)
        .map_err(|e| CliError::Internal(format!("cannot persist {}: {e}", path.display())))?;
    Ok(())
}

/// Reads a whole JSON document.
pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let content = fs::read_to_string(path)
        .map_err(|e| CliError::Schema(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&content)
        .map_err(|e| CliError::Schema(format!("{}: {e}", path.display())))
}
