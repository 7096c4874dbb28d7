//! Append-only response cache (`responses.jsonl`).

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, IoContext, Result};

/// One cached completion. `body` is the endpoint's response body, verbatim.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CachedResponse {
    pub model: String,
    pub prompt_id: String,
    pub attempts: u32,
    pub received_unix_ms: u64,
    pub body: String,
}

/// Responses keyed by `(model, prompt id)`; later lines win.
pub struct ResponseCache {
    path: PathBuf,
    entries: Mutex<HashMap<(String, String), CachedResponse>>,
    file: Mutex<File>,
}

impl ResponseCache {
    /// Opens or creates the cache. A final line cut short by an interrupted
    /// write is dropped and removed from the file.
    pub fn open(path: &Path) -> Result<Self> {
        let bytes = match fs::read(path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Vec::new(),
            Err(e) => return Err(e).at(path),
        };
        let mut entries = HashMap::new();
        let mut keep = bytes.len();
        let mut needs_newline = false;
        let mut start = 0;
        let mut line_no = 0;
        while start < bytes.len() {
            line_no += 1;
            let end = bytes[start..].iter().position(|&b| b == b'\n').map(|p| start + p);
            let line = &bytes[start..end.unwrap_or(bytes.len())];
            let parsed = serde_json::from_slice::<CachedResponse>(line);
            match (parsed, end) {
                (Ok(r), _) => {
                    needs_newline = end.is_none();
                    entries.insert((r.model.clone(), r.prompt_id.clone()), r);
                }
                (Err(_), None) => {
                    warn!("{}: dropping truncated final line {line_no}", path.display());
                    keep = start;
                }
                (Err(_), Some(_)) if line.iter().all(u8::is_ascii_whitespace) => {}
                (Err(e), Some(_)) => return Err(Error::data(format!("{}:{line_no}: {e}", path.display()))),
            }
            start = end.map_or(bytes.len(), |e| e + 1);
        }
        let mut file = OpenOptions::new().create(true).append(true).open(path).at(path)?;
        if keep < bytes.len() {
            file.set_len(keep as u64).at(path)?;
        }
        if needs_newline {
            file.write_all(b"\n").at(path)?;
        }
        Ok(Self { path: path.to_path_buf(), entries: Mutex::new(entries), file: Mutex::new(file) })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn len(&self) -> usize {
        self.entries.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, model: &str, prompt_id: &str) -> Option<CachedResponse> {
        self.entries.lock().unwrap().get(&(model.to_string(), prompt_id.to_string())).cloned()
    }

    /// Appends one line and flushes it before updating the in-memory map.
    pub fn insert(&self, entry: CachedResponse) -> Result<()> {
        let mut line = serde_json::to_vec(&entry).expect("cache entry serializes");
        line.push(b'\n');
        {
            let mut f = self.file.lock().unwrap();
            f.write_all(&line).at(&self.path)?;
            f.flush().at(&self.path)?;
        }
        self.entries.lock().unwrap().insert((entry.model.clone(), entry.prompt_id.clone()), entry);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(id: &str, body: &str) -> CachedResponse {
        CachedResponse { model: "m".into(), prompt_id: id.into(), attempts: 1, received_unix_ms: 0, body: body.into() }
    }

    #[test]
    fn last_write_wins_and_persists() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("responses.jsonl");
        let cache = ResponseCache::open(&path).unwrap();
        cache.insert(entry("a", "{\"x\": 1}\n")).unwrap();
        cache.insert(entry("a", "second")).unwrap();
        cache.insert(entry("b", "b")).unwrap();
        drop(cache);
        let cache = ResponseCache::open(&path).unwrap();
        assert_eq!(cache.len(), 2);
        assert_eq!(cache.get("m", "a").unwrap().body, "second");
        assert!(cache.get("other", "a").is_none());
        assert_eq!(fs::read_to_string(&path).unwrap().lines().count(), 3);
    }

    #[test]
    fn truncated_tail_is_dropped() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("responses.jsonl");
        let good = serde_json::to_string(&entry("a", "ok")).unwrap();
        fs::write(&path, format!("{good}\n{{\"model\":\"m\",\"prompt_id\":\"b\",\"att")).unwrap();
        let cache = ResponseCache::open(&path).unwrap();
        assert_eq!(cache.len(), 1);
        cache.insert(entry("c", "later")).unwrap();
        drop(cache);
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert_eq!(ResponseCache::open(&path).unwrap().len(), 2);
    }

    #[test]
    fn complete_line_without_newline_is_kept() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("responses.jsonl");
        fs::write(&path, serde_json::to_string(&entry("a", "ok")).unwrap()).unwrap();
        let cache = ResponseCache::open(&path).unwrap();
        cache.insert(entry("b", "ok")).unwrap();
        drop(cache);
        assert_eq!(ResponseCache::open(&path).unwrap().len(), 2);
    }

    #[test]
    fn corrupt_middle_line_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("responses.jsonl");
        let good = serde_json::to_string(&entry("a", "ok")).unwrap();
        fs::write(&path, format!("garbage\n{good}\n")).unwrap();
        assert_eq!(ResponseCache::open(&path).err().unwrap().exit_code(), 3);
    }
}
