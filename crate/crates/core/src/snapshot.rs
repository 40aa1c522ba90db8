//! Versioned on-disk snapshot of a built index.
//!
//! Layout (little-endian):
//!
//! ```text
//! magic      8 bytes  "BDINDEX\0"
//! version    u32
//! source     32 bytes SHA-256 of the inputs the index was built from
//! checksum   32 bytes SHA-256 of the payload
//! length     u64      payload length
//! payload    bincode-encoded InvertedIndex
//! ```

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::index::InvertedIndex;

pub const MAGIC: &[u8; 8] = b"BDINDEX\0";
pub const FORMAT_VERSION: u32 = 1;
const HEADER_LEN: usize = 8 + 4 + 32 + 32 + 8;

#[derive(Debug, Error)]
pub enum SnapshotError {
    #[error("snapshot not found: {0}")]
    Missing(String),
    #[error("snapshot is corrupt: {0}")]
    Corrupt(String),
    #[error("snapshot format version {found} is not supported (expected {FORMAT_VERSION}); rebuild the index")]
    VersionMismatch { found: u32 },
    #[error("snapshot was built from different inputs; rebuild the index")]
    Stale,
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
}

/// Digest identifying the inputs of an index build.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SourceDigest(pub [u8; 32]);

impl SourceDigest {
    /// Hashes labeled parts; each part is length-prefixed so boundaries are unambiguous.
    pub fn of_parts<'a>(parts: impl IntoIterator<Item = (&'a str, &'a [u8])>) -> SourceDigest {
        let mut hasher = Sha256::new();
        for (label, bytes) in parts {
            hasher.update((label.len() as u64).to_le_bytes());
            hasher.update(label.as_bytes());
            hasher.update((bytes.len() as u64).to_le_bytes());
            hasher.update(bytes);
        }
        SourceDigest(hasher.finalize().into())
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }
}

pub fn encode(index: &InvertedIndex, source: SourceDigest) -> Vec<u8> {
    let payload = bincode::serialize(index).expect("index serialization is infallible");
    let checksum: [u8; 32] = Sha256::digest(&payload).into();
    let mut out = Vec::with_capacity(HEADER_LEN + payload.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&source.0);
    out.extend_from_slice(&checksum);
    out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
    out.extend_from_slice(&payload);
    out
}

/// Decodes a snapshot; `expected` (when given) must match the embedded source digest.
pub fn decode(bytes: &[u8], expected: Option<SourceDigest>) -> Result<(InvertedIndex, SourceDigest), SnapshotError> {
    if bytes.len() < HEADER_LEN || &bytes[..8] != MAGIC {
        return Err(SnapshotError::Corrupt("bad magic or truncated header".into()));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(SnapshotError::VersionMismatch { found: version });
    }
    let source = SourceDigest(bytes[12..44].try_into().unwrap());
    let checksum: [u8; 32] = bytes[44..76].try_into().unwrap();
    let len = u64::from_le_bytes(bytes[76..84].try_into().unwrap()) as usize;
    let payload = &bytes[HEADER_LEN..];
    if payload.len() != len {
        return Err(SnapshotError::Corrupt(format!("payload length {} != declared {len}", payload.len())));
    }
    if <[u8; 32]>::from(Sha256::digest(payload)) != checksum {
        return Err(SnapshotError::Corrupt("payload checksum mismatch".into()));
    }
    if expected.is_some_and(|e| e != source) {
        return Err(SnapshotError::Stale);
    }
    let index = bincode::deserialize(payload).map_err(|e| SnapshotError::Corrupt(e.to_string()))?;
    Ok((index, source))
}

/// Writes atomically (temp file + rename).
pub fn write(path: &Path, index: &InvertedIndex, source: SourceDigest) -> Result<(), SnapshotError> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(&encode(index, source))?;
    tmp.persist(path).map_err(|e| SnapshotError::Io(e.error))?;
    Ok(())
}

pub fn read(path: &Path, expected: Option<SourceDigest>) -> Result<(InvertedIndex, SourceDigest), SnapshotError> {
    let bytes = fs::read(path).map_err(|e| match e.kind() {
        io::ErrorKind::NotFound => SnapshotError::Missing(path.display().to_string()),
        _ => SnapshotError::Io(e),
    })?;
    decode(&bytes, expected)
}
