use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One line of the cache file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CacheEntry {
    pub model: String,
    pub text_sha256: String,
    pub dimension: usize,
    pub values: Vec<f64>,
}

/// Persistent (model, text hash) → vector store backed by an append-only JSONL
/// file. Floats are written in shortest round-trip form, so a hit returns the
/// stored vector bit for bit.
#[derive(Debug, Default)]
pub struct EmbeddingCache {
    path: Option<PathBuf>,
    entries: HashMap<(String, String), CacheEntry>,
}

impl EmbeddingCache {
    pub fn in_memory() -> Self {
        EmbeddingCache::default()
    }

    /// Opens (or starts) the cache at `path`. An existing file is loaded;
    /// the first entry for a key wins.
    pub fn open(path: impl Into<PathBuf>) -> Result<Self> {
        let path = path.into();
        let mut entries = HashMap::new();
        if path.exists() {
            let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
            for (i, line) in text.lines().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                let entry: CacheEntry = serde_json::from_str(line).map_err(|e| Error::Parse {
                    path: path.clone(),
                    location: format!("{}:{}", i + 1, e.column()),
                    message: e.to_string(),
                })?;
                if entry.dimension != entry.values.len() {
                    return Err(Error::Parse {
                        path: path.clone(),
                        location: (i + 1).to_string(),
                        message: format!(
                            "dimension {} disagrees with {} stored values",
                            entry.dimension,
                            entry.values.len()
                        ),
                    });
                }
                entries
                    .entry((entry.model.clone(), entry.text_sha256.clone()))
                    .or_insert(entry);
            }
        }
        Ok(EmbeddingCache {
            path: Some(path),
            entries,
        })
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn get(&self, model: &str, text_sha256: &str) -> Option<&CacheEntry> {
        self.entries
            .get(&(model.to_string(), text_sha256.to_string()))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Stores new entries, appending them to the backing file in the given order.
    pub fn append(&mut self, new_entries: Vec<CacheEntry>) -> Result<()> {
        let fresh: Vec<CacheEntry> = new_entries
            .into_iter()
            .filter(|e| {
                !self
                    .entries
                    .contains_key(&(e.model.clone(), e.text_sha256.clone()))
            })
            .collect();
        if fresh.is_empty() {
            return Ok(());
        }
        if let Some(path) = &self.path {
            if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
            }
            let file: File = OpenOptions::new()
                .create(true)
                .append(true)
                .open(path)
                .map_err(|e| Error::io(path, e))?;
            let mut w = BufWriter::new(file);
            for e in &fresh {
                let line = serde_json::to_string(e).expect("cache entry serializes");
                writeln!(w, "{line}").map_err(|err| Error::io(path, err))?;
            }
            w.flush().map_err(|err| Error::io(path, err))?;
        }
        for e in fresh {
            self.entries
                .insert((e.model.clone(), e.text_sha256.clone()), e);
        }
        Ok(())
    }
}
