//! On-disk cache of per-sentence storage results.
//!
//! Entries are keyed by the source identity, the sentence's words and the
//! distance window, so a changed backend or window never reuses a result.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CachedResult {
    pub identity: String,
    pub max_distance: Option<usize>,
    pub words: Vec<String>,
    pub pp_matrix: Vec<(usize, usize, f64)>,
    pub storage: Vec<f64>,
    pub approximate: bool,
    pub windowed: bool,
}

pub fn sentence_hash(words: &[String]) -> String {
    let mut h = Sha256::new();
    for t in words {
        h.update(t.as_bytes());
        h.update([0x1f]);
    }
    hex::encode(h.finalize())
}

pub fn cache_key(identity: &str, words: &[String], max_distance: Option<usize>) -> String {
    let window = max_distance.map_or_else(|| "all".to_string(), |d| d.to_string());
    let mut h = Sha256::new();
    h.update(identity.as_bytes());
    h.update([0]);
    h.update(sentence_hash(words).as_bytes());
    h.update([0]);
    h.update(window.as_bytes());
    hex::encode(h.finalize())
}

pub struct Cache {
    dir: PathBuf,
}

impl Cache {
    pub fn new(dir: &Path) -> Self {
        Cache {
            dir: dir.to_path_buf(),
        }
    }

    fn path(&self, key: &str) -> PathBuf {
        self.dir.join(&key[..2]).join(format!("{key}.json"))
    }

    /// A stored entry whose key fields all match; unreadable or
    /// mismatching entries count as misses.
    pub fn get(
        &self,
        identity: &str,
        words: &[String],
        max_distance: Option<usize>,
    ) -> Option<CachedResult> {
        let key = cache_key(identity, words, max_distance);
        let text = std::fs::read_to_string(self.path(&key)).ok()?;
        let entry: CachedResult = match serde_json::from_str(&text) {
            Ok(e) => e,
            Err(e) => {
                log::warn!("ignoring corrupt cache entry {key}: {e}");
                return None;
            }
        };
        (entry.identity == identity && entry.words == words && entry.max_distance == max_distance)
            .then_some(entry)
    }

    /// Best effort: a failed write only costs a recomputation later.
    pub fn put(&self, entry: &CachedResult) {
        let key = cache_key(&entry.identity, &entry.words, entry.max_distance);
        let path = self.path(&key);
        let write = || -> std::io::Result<()> {
            std::fs::create_dir_all(path.parent().expect("nested path"))?;
            let tmp = path.with_extension("tmp");
            std::fs::write(
                &tmp,
                serde_json::to_string(entry).expect("entry serializes"),
            )?;
            std::fs::rename(&tmp, &path)
        };
        if let Err(e) = write() {
            log::warn!("could not write cache entry {}: {e}", path.display());
        }
    }
}
