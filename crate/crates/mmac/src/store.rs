//! On-disk tool library and trace files.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use mmac_core::codex::{LibraryEntry, ToolLibrary};
use mmac_core::orchestrator::Trace;

use crate::error::{Error, Result};

/// Reads a library file. A missing file is an empty library; entries under
/// the retention threshold are dropped.
pub fn load_library(path: &Path) -> Result<ToolLibrary> {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(ToolLibrary::new()),
        Err(e) => return Err(Error::io(path, e)),
    };
    let entries: BTreeMap<String, LibraryEntry> = serde_json::from_str(&text).map_err(|e| Error::format(path, e))?;
    Ok(ToolLibrary::from_entries(entries))
}

/// Writes through a temporary file in the same directory and renames it
/// into place, so readers see either the old library or the new one.
pub fn save_library(path: &Path, lib: &ToolLibrary) -> Result<()> {
    let json = serde_json::to_string_pretty(lib).map_err(|e| Error::format(path, e))?;
    write_atomic(path, json.as_bytes())
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(tmp.path(), e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(tmp.path(), e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

pub fn write_trace(path: &Path, trace: &Trace) -> Result<()> {
    if let Some(d) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(d).map_err(|e| Error::io(d, e))?;
    }
    fs::write(path, trace.to_jsonl()).map_err(|e| Error::io(path, e))
}

pub fn read_trace(path: &Path) -> Result<Trace> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Trace::from_jsonl(&text).map_err(|e| Error::format(path, e))
}
