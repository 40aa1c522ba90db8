use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};
use tracing::warn;

use super::{GenerationRequest, GenerationResult};

/// Content address of a generation.
///
/// Covers kind, term, community slots (never names), sorted sample ids,
/// model, seed, template version and backend id.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct CacheKey(String);

impl CacheKey {
    pub fn new(request: &GenerationRequest, template_version: &str, backend_id: &str) -> CacheKey {
        let groups: Vec<(u8, Vec<&str>)> = request
            .samples
            .iter()
            .map(|s| {
                let mut ids: Vec<&str> = s.doc_ids.iter().map(String::as_str).collect();
                ids.sort_unstable();
                (s.community.position(), ids)
            })
            .collect();
        let canonical = serde_json::json!([
            "bd-generation-v1",
            request.kind,
            request.term,
            groups,
            request.model_id,
            request.seed,
            template_version,
            backend_id,
        ]);
        CacheKey(hex::encode(Sha256::digest(canonical.to_string().as_bytes())))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

/// Generation results persisted as one JSON file per key.
#[derive(Clone, Debug)]
pub struct GenerationCache {
    dir: PathBuf,
}

impl GenerationCache {
    pub fn open(dir: impl Into<PathBuf>) -> io::Result<GenerationCache> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(GenerationCache { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path(&self, key: &CacheKey) -> PathBuf {
        self.dir.join(&key.0[..2]).join(format!("{}.json", key.0))
    }

    /// Stored result for `key`. Unreadable entries, or entries recorded for a
    /// different request, are dropped with a warning.
    pub fn get(&self, key: &CacheKey, request: &GenerationRequest) -> Option<GenerationResult> {
        let path = self.path(key);
        let bytes = match fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return None,
            Err(e) => {
                warn!(path = %path.display(), error = %e, "cannot read cache entry");
                return None;
            }
        };
        match serde_json::from_slice::<GenerationResult>(&bytes) {
            Ok(result) if &result.request == request => Some(result),
            Ok(_) => {
                warn!(path = %path.display(), "cache entry belongs to a different request; dropping it");
                let _ = fs::remove_file(&path);
                None
            }
            Err(e) => {
                warn!(path = %path.display(), error = %e, "corrupt cache entry; dropping it");
                let _ = fs::remove_file(&path);
                None
            }
        }
    }

    /// Atomic write (temp file + rename).
    pub fn put(&self, key: &CacheKey, result: &GenerationResult) -> io::Result<()> {
        let path = self.path(key);
        let parent = path.parent().expect("cache paths have a parent");
        fs::create_dir_all(parent)?;
        let mut tmp = tempfile::NamedTempFile::new_in(parent)?;
        serde_json::to_writer_pretty(&mut tmp, result)?;
        tmp.write_all(b"\n")?;
        tmp.persist(&path).map_err(|e| e.error)?;
        Ok(())
    }

    pub fn entry_path(&self, key: &CacheKey) -> PathBuf {
        self.path(key)
    }
}
