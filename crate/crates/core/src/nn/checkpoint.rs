use std::fs;
use std::io::Write;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CHECKPOINT_VERSION: u32 = 1;
const MAGIC: &str = "rftrack-checkpoint";

/// First line of every checkpoint file.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    format: String,
    version: u32,
    kind: String,
    crc32: u32,
    bytes: usize,
}

/// Writes `value` as a JSON payload preceded by a one-line header carrying
/// the format version, a content kind tag and the payload CRC-32.
pub fn write_checkpoint<T: Serialize>(path: &Path, kind: &str, value: &T) -> Result<()> {
    let payload = serde_json::to_vec(value)?;
    let header = Header {
        format: MAGIC.into(),
        version: CHECKPOINT_VERSION,
        kind: kind.into(),
        crc32: crc32fast::hash(&payload),
        bytes: payload.len(),
    };
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    let mut f = fs::File::create(path)?;
    serde_json::to_writer(&mut f, &header)?;
    f.write_all(b"\n")?;
    f.write_all(&payload)?;
    Ok(())
}

pub fn read_checkpoint<T: DeserializeOwned>(path: &Path, kind: &str) -> Result<T> {
    let raw = fs::read(path)?;
    let split = raw
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::Checkpoint("missing header line".into()))?;
    let header: Header = serde_json::from_slice(&raw[..split])
        .map_err(|e| Error::Checkpoint(format!("unreadable header: {e}")))?;
    if header.format != MAGIC {
        return Err(Error::Checkpoint(format!("not a checkpoint: {}", header.format)));
    }
    if header.version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!(
            "version {} cannot be loaded by version {CHECKPOINT_VERSION}",
            header.version
        )));
    }
    if header.kind != kind {
        return Err(Error::Checkpoint(format!(
            "expected a {kind} checkpoint, found {}",
            header.kind
        )));
    }
    let payload = &raw[split + 1..];
    if payload.len() != header.bytes || crc32fast::hash(payload) != header.crc32 {
        return Err(Error::Checkpoint("payload CRC mismatch".into()));
    }
    Ok(serde_json::from_slice(payload)?)
}
