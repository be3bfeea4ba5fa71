//! JSON report plumbing: every report carries the tool version and echoes
//! the full effective configuration; files land atomically.

use std::fs;
use std::io::Write;
use std::path::Path;

use odx_core::{Error, Result};
use serde::Serialize;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Serializes pretty JSON with a trailing newline and writes it via a
/// temp-file rename.
pub fn write_json<T: Serialize>(value: &T, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::numeric(format!("report serialization failed: {e}")))?;
    text.push('\n');
    write_atomic(text.as_bytes(), path)
}

pub fn write_atomic(bytes: &[u8], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let tmp = path.with_extension("partial");
    let mut file = fs::File::create(&tmp).map_err(|e| Error::io(tmp.display().to_string(), e))?;
    file.write_all(bytes)
        .map_err(|e| Error::io(tmp.display().to_string(), e))?;
    drop(file);
    fs::rename(&tmp, path).map_err(|e| Error::io(path.display().to_string(), e))
}

/// Creates the directory (and parents) if needed.
pub fn ensure_dir(path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::create_dir_all(path).map_err(|e| Error::io(path.display().to_string(), e))
}
