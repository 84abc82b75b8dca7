//! JSON/CSV persistence helpers.
//!
//! All JSON written here is deterministic: `serde_json` maps are sorted, f64
//! rendering is shortest-roundtrip, and none of the documents carry
//! timestamps. Re-running an experiment with the same seed reproduces every
//! output file byte for byte.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub fn save_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::io(path, format!("serialize: {e}")))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::parse(path, e))
}

pub fn save_text(text: &str, path: &Path) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

/// Content hash of any serializable value, independent of JSON field order
/// in source files: the value is converted to a `serde_json::Value` (sorted
/// maps) and hashed in compact form.
pub fn canonical_hash<T: Serialize>(value: &T) -> Result<String> {
    let v = serde_json::to_value(value)
        .map_err(|e| Error::InvalidArgument(format!("cannot canonicalize: {e}")))?;
    let bytes = serde_json::to_vec(&v)
        .map_err(|e| Error::InvalidArgument(format!("cannot serialize: {e}")))?;
    Ok(sha256_hex(&bytes))
}

/// Minimal CSV writer; fields never contain commas or quotes here.
pub fn write_csv(path: &Path, header: &[String], rows: &[Vec<String>]) -> Result<()> {
    let mut out = String::new();
    out.push_str(&header.join(","));
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    save_text(&out, path)
}
