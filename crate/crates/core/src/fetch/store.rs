use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::fetcher::{FetchOutcome, FetchResult};
use crate::error::{Error, Result};
use crate::scorer::ScoreMap;

/// One line of `index.jsonl`: what happened to a URL.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub url: String,
    pub outcome: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub http_status: Option<u16>,
    #[serde(default)]
    pub sha512: Option<String>,
    #[serde(default)]
    pub phash: Option<String>,
    #[serde(default)]
    pub width: Option<u32>,
    #[serde(default)]
    pub height: Option<u32>,
}

impl IndexEntry {
    pub fn is_ok(&self) -> bool {
        self.outcome == "ok"
    }

    /// Transient failures are retried on the next run instead of reused.
    pub fn is_final(&self) -> bool {
        !matches!(self.outcome.as_str(), "timeout" | "network_error")
    }

    pub fn sha512_bytes(&self) -> Option<[u8; 64]> {
        let v = hex::decode(self.sha512.as_deref()?).ok()?;
        v.try_into().ok()
    }

    pub fn phash_u64(&self) -> Option<u64> {
        u64::from_str_radix(self.phash.as_deref()?, 16).ok()
    }
}

/// Content-addressed image store: blobs at `<root>/<first2>/<sha512>.bin`
/// and an append-only `index.jsonl` mapping URLs to outcomes.
pub struct ImageStore {
    root: PathBuf,
    index: Mutex<BTreeMap<String, IndexEntry>>,
}

impl ImageStore {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        fs::create_dir_all(&root).map_err(|e| Error::io(&root, e))?;
        let mut index = BTreeMap::new();
        let path = root.join("index.jsonl");
        if path.exists() {
            let f = File::open(&path).map_err(|e| Error::io(&path, e))?;
            for (i, line) in BufReader::new(f).lines().enumerate() {
                let line = line.map_err(|e| Error::io(&path, e))?;
                if line.trim().is_empty() {
                    continue;
                }
                // a torn final line from an interrupted run is ignored
                match serde_json::from_str::<IndexEntry>(&line) {
                    Ok(e) => {
                        index.insert(e.url.clone(), e);
                    }
                    Err(e) => log::warn!("{}:{}: skipping index line: {e}", path.display(), i + 1),
                }
            }
        }
        Ok(ImageStore {
            root,
            index: Mutex::new(index),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn blob_path(&self, sha512: &[u8; 64]) -> PathBuf {
        let hex = hex::encode(sha512);
        self.root.join(&hex[..2]).join(format!("{hex}.bin"))
    }

    pub fn lookup(&self, url: &str) -> Option<IndexEntry> {
        self.index.lock().expect("index poisoned").get(url).cloned()
    }

    fn put_blob(&self, sha512: &[u8; 64], bytes: &[u8]) -> Result<()> {
        let path = self.blob_path(sha512);
        if path.exists() {
            return Ok(());
        }
        let dir = path.parent().expect("blob has a parent");
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
        tmp.write_all(bytes).map_err(|e| Error::io(&path, e))?;
        tmp.persist(&path).map_err(|e| Error::io(&path, e.error))?;
        Ok(())
    }

    /// Stores blobs of successful results and appends one index line per
    /// result, in the order given.
    pub fn record(&self, results: &[FetchResult]) -> Result<Vec<IndexEntry>> {
        let path = self.root.join("index.jsonl");
        let mut file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| Error::io(&path, e))?;
        let mut entries = Vec::with_capacity(results.len());
        let mut buf = String::new();
        for r in results {
            let mut entry = IndexEntry {
                url: r.url.clone(),
                outcome: r.outcome.as_str().to_string(),
                http_status: None,
                sha512: None,
                phash: None,
                width: None,
                height: None,
            };
            match &r.outcome {
                FetchOutcome::Ok(rec) => {
                    self.put_blob(&rec.sha512, &rec.bytes)?;
                    entry.sha512 = Some(hex::encode(rec.sha512));
                    entry.phash = Some(format!("{:016x}", rec.phash));
                    entry.width = Some(rec.width);
                    entry.height = Some(rec.height);
                }
                FetchOutcome::HttpError(code) => entry.http_status = Some(*code),
                _ => {}
            }
            buf.push_str(&serde_json::to_string(&entry)?);
            buf.push('\n');
            entries.push(entry);
        }
        file.write_all(buf.as_bytes()).map_err(|e| Error::io(&path, e))?;
        file.sync_data().map_err(|e| Error::io(&path, e))?;
        let mut index = self.index.lock().expect("index poisoned");
        for e in &entries {
            index.insert(e.url.clone(), e.clone());
        }
        Ok(entries)
    }
}

#[derive(Serialize, Deserialize)]
struct ScoreLine {
    sha512: String,
    scores: ScoreMap,
}

/// Safety scores keyed by image digest, persisted so re-runs never
/// re-score an image.
pub struct ScoreCache {
    path: Option<PathBuf>,
    map: Mutex<BTreeMap<String, ScoreMap>>,
}

impl ScoreCache {
    pub fn in_memory() -> Self {
        ScoreCache {
            path: None,
            map: Mutex::new(BTreeMap::new()),
        }
    }

    pub fn open(path: impl Into<PathBuf>) -> Result<Self> {
        let path = path.into();
        let mut map = BTreeMap::new();
        if path.exists() {
            let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
            for line in text.lines().filter(|l| !l.trim().is_empty()) {
                if let Ok(l) = serde_json::from_str::<ScoreLine>(line) {
                    map.insert(l.sha512, l.scores);
                }
            }
        }
        Ok(ScoreCache {
            path: Some(path),
            map: Mutex::new(map),
        })
    }

    pub fn len(&self) -> usize {
        self.map.lock().expect("cache poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get_or_compute(
        &self,
        sha512: &[u8; 64],
        compute: impl FnOnce() -> Result<ScoreMap>,
    ) -> Result<ScoreMap> {
        let key = hex::encode(sha512);
        if let Some(s) = self.map.lock().expect("cache poisoned").get(&key) {
            return Ok(s.clone());
        }
        let scores = compute()?;
        let mut map = self.map.lock().expect("cache poisoned");
        if !map.contains_key(&key) {
            if let Some(path) = &self.path {
                let line = serde_json::to_string(&ScoreLine {
                    sha512: key.clone(),
                    scores: scores.clone(),
                })?;
                let mut f = OpenOptions::new()
                    .create(true)
                    .append(true)
                    .open(path)
                    .map_err(|e| Error::io(path, e))?;
                writeln!(f, "{line}").map_err(|e| Error::io(path, e))?;
            }
            map.insert(key, scores.clone());
        }
        Ok(scores)
    }
}
