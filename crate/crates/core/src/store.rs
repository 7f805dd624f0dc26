//! Persistent page store.
//!
//! Layout of a store directory:
//!
//! ```text
//! <dir>/journal.jsonl     one JSON record per line, append-only
//! <dir>/bodies/<sha256>   raw response bodies, named by the lowercase hex
//!                         SHA-256 of their content
//! ```
//!
//! Journal record fields: `url` (normalized absolute URL), `method`
//! (`"GET"` or `"HEAD"`), `status`, `mime` (bare lowercase type or null),
//! `location` (raw Location header or null), `header_size`, `body_size`,
//! `body` (hex digest or null), `aborted`, `fetched_at` (Unix seconds).
//! A store holds at most one GET and one HEAD record per URL; later writes
//! for an existing key are ignored. Redirect and aborted bodies are never
//! stored.

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::fetch::{FetchResponse, HeadResponse};

pub const JOURNAL_FILE: &str = "journal.jsonl";
pub const BODIES_DIR: &str = "bodies";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("store i/o: {0}")]
    Io(#[from] io::Error),
    #[error("journal line {line}: {source}")]
    Journal { line: usize, source: serde_json::Error },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "GET")]
    Get,
    #[serde(rename = "HEAD")]
    Head,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoreRecord {
    pub url: String,
    pub method: Method,
    pub status: u16,
    pub mime: Option<String>,
    pub location: Option<String>,
    pub header_size: u64,
    pub body_size: u64,
    pub body: Option<String>,
    pub aborted: bool,
    pub fetched_at: u64,
}

pub fn body_digest(body: &[u8]) -> String {
    hex::encode(Sha256::digest(body))
}

/// Journal plus content-addressed bodies, with an in-memory index.
#[derive(Debug)]
pub struct PageStore {
    dir: PathBuf,
    records: Vec<StoreRecord>,
    index: HashMap<(String, Method), usize>,
    journal: Option<BufWriter<File>>,
}

impl PageStore {
    /// Opens (creating if needed) a store for reading and appending.
    pub fn open(dir: impl AsRef<Path>) -> Result<Self, StoreError> {
        let dir = dir.as_ref().to_path_buf();
        fs::create_dir_all(dir.join(BODIES_DIR))?;
        let mut store = Self::load(&dir)?;
        let file = OpenOptions::new().create(true).append(true).open(dir.join(JOURNAL_FILE))?;
        store.journal = Some(BufWriter::new(file));
        Ok(store)
    }

    /// Opens an existing store without write access.
    pub fn open_read_only(dir: impl AsRef<Path>) -> Result<Self, StoreError> {
        let dir = dir.as_ref();
        if !dir.join(JOURNAL_FILE).is_file() {
            return Err(StoreError::Io(io::Error::new(
                io::ErrorKind::NotFound,
                format!("no {} in {}", JOURNAL_FILE, dir.display()),
            )));
        }
        Self::load(dir)
    }

    fn load(dir: &Path) -> Result<Self, StoreError> {
        let mut store = Self {
            dir: dir.to_path_buf(),
            records: Vec::new(),
            index: HashMap::new(),
            journal: None,
        };
        let path = dir.join(JOURNAL_FILE);
        if path.is_file() {
            for (n, line) in BufReader::new(File::open(path)?).lines().enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                let rec: StoreRecord =
                    serde_json::from_str(&line).map_err(|source| StoreError::Journal { line: n + 1, source })?;
                store.insert(rec);
            }
        }
        Ok(store)
    }

    fn insert(&mut self, rec: StoreRecord) -> bool {
        let key = (rec.url.clone(), rec.method);
        if self.index.contains_key(&key) {
            return false;
        }
        self.index.insert(key, self.records.len());
        self.records.push(rec);
        true
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn records(&self) -> &[StoreRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn record(&self, url: &str, method: Method) -> Option<&StoreRecord> {
        self.index.get(&(url.to_string(), method)).map(|&i| &self.records[i])
    }

    fn body_path(&self, digest: &str) -> PathBuf {
        self.dir.join(BODIES_DIR).join(digest)
    }

    pub fn read_body(&self, digest: &str) -> io::Result<Vec<u8>> {
        fs::read(self.body_path(digest))
    }

    fn append(&mut self, rec: StoreRecord) -> Result<bool, StoreError> {
        if self.index.contains_key(&(rec.url.clone(), rec.method)) {
            return Ok(false);
        }
        let journal = self
            .journal
            .as_mut()
            .ok_or_else(|| io::Error::new(io::ErrorKind::PermissionDenied, "store opened read-only"))?;
        let line = serde_json::to_string(&rec).map_err(io::Error::from)?;
        writeln!(journal, "{line}")?;
        journal.flush()?;
        Ok(self.insert(rec))
    }

    /// Records a GET answer. Returns `false` if the URL already had one.
    pub fn put_get(&mut self, url: &str, resp: &FetchResponse, fetched_at: u64) -> Result<bool, StoreError> {
        if self.record(url, Method::Get).is_some() {
            return Ok(false);
        }
        let keep_body = !resp.aborted && !(300..400).contains(&resp.status);
        let body = if keep_body {
            let digest = body_digest(&resp.body);
            let path = self.body_path(&digest);
            if !path.exists() {
                fs::write(&path, &resp.body)?;
            }
            Some(digest)
        } else {
            None
        };
        self.append(StoreRecord {
            url: url.to_string(),
            method: Method::Get,
            status: resp.status,
            mime: resp.mime.clone(),
            location: resp.location.clone(),
            header_size: resp.header_size,
            body_size: resp.body_size,
            body,
            aborted: resp.aborted,
            fetched_at,
        })
    }

    pub fn put_head(&mut self, url: &str, resp: &HeadResponse, fetched_at: u64) -> Result<bool, StoreError> {
        self.append(StoreRecord {
            url: url.to_string(),
            method: Method::Head,
            status: resp.status,
            mime: resp.mime.clone(),
            location: None,
            header_size: resp.header_size,
            body_size: 0,
            body: None,
            aborted: false,
            fetched_at,
        })
    }

    /// Stored GET answer; `None` on a miss or unreadable body.
    pub fn get(&self, url: &str) -> Option<FetchResponse> {
        let rec = self.record(url, Method::Get)?;
        let body = match &rec.body {
            Some(d) => self.read_body(d).ok()?,
            None => Vec::new(),
        };
        Some(FetchResponse {
            status: rec.status,
            mime: rec.mime.clone(),
            location: rec.location.clone(),
            body_size: if rec.body.is_some() { body.len() as u64 } else { rec.body_size },
            body,
            header_size: rec.header_size,
            aborted: rec.aborted,
        })
    }

    pub fn head(&self, url: &str) -> Option<HeadResponse> {
        let rec = self.record(url, Method::Head)?;
        Some(HeadResponse {
            status: rec.status,
            mime: rec.mime.clone(),
            header_size: rec.header_size,
        })
    }
}
