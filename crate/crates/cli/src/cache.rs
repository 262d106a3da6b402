//! Persistent value cache: one JSON object per line, append-only, compacted
//! on load. Every access holds an exclusive lock on the file.
//!
//! Floats are written in shortest round-trip form, so a hit reproduces the
//! stored bits exactly. Lookups match the full key, tolerance included; an
//! entry computed at a looser tolerance never answers a tighter request.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheRecord {
    /// `model|q|args|tol`.
    pub key: String,
    pub value_re: f64,
    pub value_im: f64,
    pub err_est: f64,
    pub terms: usize,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
}

impl CacheRecord {
    pub fn new(key: String, value_re: f64, value_im: f64, err_est: f64, terms: usize) -> Self {
        let timestamp = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        Self {
            key,
            value_re,
            value_im,
            err_est,
            terms,
            timestamp,
        }
    }

    /// Tolerance encoded in the last key field.
    pub fn tol(&self) -> Option<f64> {
        self.key.rsplit('|').next()?.parse().ok()
    }
}

/// Build the canonical key. `q` and `tol` use shortest round-trip spelling.
pub fn cache_key(model: &str, q: f64, args: &str, tol: f64) -> String {
    format!("{model}|{q}|{args}|{tol}")
}

fn cache_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Cache(format!("{}: {e}", path.display()))
}

pub struct Cache {
    path: PathBuf,
    entries: BTreeMap<String, CacheRecord>,
}

impl Cache {
    /// Open (creating if needed), drop malformed lines and superseded
    /// duplicates, and rewrite the file when that changed anything.
    pub fn open(path: &Path) -> Result<Self, CliError> {
        let mut file = OpenOptions::new()
            .read(true)
            .write(true)
            .create(true)
            .truncate(false)
            .open(path)
            .map_err(|e| cache_err(path, e))?;
        file.lock().map_err(|e| cache_err(path, e))?;

        let mut entries = BTreeMap::new();
        let mut lines = 0usize;
        for line in BufReader::new(&file).lines() {
            let line = line.map_err(|e| cache_err(path, e))?;
            lines += 1;
            if let Ok(rec) = serde_json::from_str::<CacheRecord>(&line) {
                // later lines supersede earlier ones
                entries.insert(rec.key.clone(), rec);
            }
        }
        if lines != entries.len() {
            rewrite(&mut file, &entries).map_err(|e| cache_err(path, e))?;
        }
        file.unlock().map_err(|e| cache_err(path, e))?;
        Ok(Self {
            path: path.to_path_buf(),
            entries,
        })
    }

    pub fn get(&self, key: &str) -> Option<&CacheRecord> {
        self.entries.get(key)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Append one record under the lock.
    pub fn insert(&mut self, rec: CacheRecord) -> Result<(), CliError> {
        let path = self.path.clone();
        let mut file = OpenOptions::new()
            .append(true)
            .create(true)
            .open(&path)
            .map_err(|e| cache_err(&path, e))?;
        file.lock().map_err(|e| cache_err(&path, e))?;
        let mut line = serde_json::to_string(&rec).map_err(|e| CliError::Cache(e.to_string()))?;
        line.push('\n');
        file.write_all(line.as_bytes())
            .map_err(|e| cache_err(&path, e))?;
        file.sync_data().map_err(|e| cache_err(&path, e))?;
        file.unlock().map_err(|e| cache_err(&path, e))?;
        self.entries.insert(rec.key.clone(), rec);
        Ok(())
    }
}

fn rewrite(file: &mut File, entries: &BTreeMap<String, CacheRecord>) -> std::io::Result<()> {
    let mut buf = String::new();
    for rec in entries.values() {
        buf.push_str(&serde_json::to_string(rec).map_err(std::io::Error::other)?);
        buf.push('\n');
    }
    file.set_len(0)?;
    file.seek(SeekFrom::Start(0))?;
    file.write_all(buf.as_bytes())?;
    file.sync_data()
}
