use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::{Mutex, RwLock};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CacheValue {
    Text { response_text: String },
    Vector { vector: Vec<f64> },
}

/// One line of the cache file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub key_hash: String,
    pub request_digest: String,
    #[serde(flatten)]
    pub value: CacheValue,
}

/// Append-only JSONL response cache. Reads are concurrent; appends are
/// serialized. Without a path the cache lives in memory only.
#[derive(Debug)]
pub struct ResponseCache {
    path: Option<PathBuf>,
    entries: RwLock<HashMap<String, CacheEntry>>,
    writer: Mutex<Option<BufWriter<File>>>,
}

impl ResponseCache {
    pub fn in_memory() -> Self {
        ResponseCache {
            path: None,
            entries: RwLock::new(HashMap::new()),
            writer: Mutex::new(None),
        }
    }

    /// Opens (or creates) a cache file, loading existing entries. A torn last
    /// line from an interrupted run is ignored.
    pub fn open(path: impl AsRef<Path>) -> std::io::Result<Self> {
        let path = path.as_ref().to_path_buf();
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        let mut entries = HashMap::new();
        if path.exists() {
            for line in BufReader::new(File::open(&path)?).lines() {
                let line = line?;
                match serde_json::from_str::<CacheEntry>(&line) {
                    Ok(e) => {
                        entries.insert(e.key_hash.clone(), e);
                    }
                    Err(e) if !line.trim().is_empty() => {
                        log::warn!("ignoring unreadable cache line in {}: {e}", path.display())
                    }
                    Err(_) => {}
                }
            }
        }
        Ok(ResponseCache {
            path: Some(path),
            entries: RwLock::new(entries),
            writer: Mutex::new(None),
        })
    }

    pub fn get(&self, key_hash: &str) -> Option<CacheValue> {
        self.entries.read().unwrap().get(key_hash).map(|e| e.value.clone())
    }

    pub fn len(&self) -> usize {
        self.entries.read().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn insert(&self, entry: CacheEntry) -> std::io::Result<()> {
        if let Some(path) = &self.path {
            let mut w = self.writer.lock().unwrap();
            if w.is_none() {
                let f = OpenOptions::new().create(true).append(true).open(path)?;
                *w = Some(BufWriter::new(f));
            }
            let out = w.as_mut().expect("writer opened");
            serde_json::to_writer(&mut *out, &entry)?;
            out.write_all(b"\n")?;
            out.flush()?;
        }
        self.entries.write().unwrap().insert(entry.key_hash.clone(), entry);
        Ok(())
    }

    /// Rewrites the file with one line per key, sorted by key, so the file
    /// bytes do not depend on the order in which workers finished.
    pub fn compact(&self) -> std::io::Result<()> {
        let Some(path) = &self.path else {
            return Ok(());
        };
        let mut w = self.writer.lock().unwrap();
        if let Some(mut old) = w.take() {
            old.flush()?;
        }
        let entries = self.entries.read().unwrap();
        let mut keys: Vec<&String> = entries.keys().collect();
        keys.sort();
        let mut buf = Vec::new();
        for k in keys {
            serde_json::to_writer(&mut buf, &entries[k])?;
            buf.push(b'\n');
        }
        crate::io::write_atomic(path, &buf)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn text(k: &str, t: &str) -> CacheEntry {
        CacheEntry {
            key_hash: k.into(),
            request_digest: "d".into(),
            value: CacheValue::Text {
                response_text: t.into(),
            },
        }
    }

    #[test]
    fn persists_and_reloads() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.jsonl");
        {
            let c = ResponseCache::open(&p).unwrap();
            c.insert(text("b", "two")).unwrap();
            c.insert(text("a", "one")).unwrap();
            c.insert(CacheEntry {
                key_hash: "v".into(),
                request_digest: "d".into(),
                value: CacheValue::Vector {
                    vector: vec![0.1, -2.5e-7, 1.0 / 3.0],
                },
            })
            .unwrap();
        }
        std::fs::OpenOptions::new()
            .append(true)
            .open(&p)
            .unwrap()
            .write_all(b"{\"key_hash\":\"torn")
            .unwrap();
        let c = ResponseCache::open(&p).unwrap();
        assert_eq!(c.len(), 3);
        assert_eq!(
            c.get("v"),
            Some(CacheValue::Vector {
                vector: vec![0.1, -2.5e-7, 1.0 / 3.0]
            })
        );
        c.compact().unwrap();
        let body = std::fs::read_to_string(&p).unwrap();
        let keys: Vec<_> = body
            .lines()
            .map(|l| serde_json::from_str::<CacheEntry>(l).unwrap().key_hash)
            .collect();
        assert_eq!(keys, ["a", "b", "v"]);
    }
}
