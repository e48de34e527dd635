use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use flate2::read::MultiGzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;
use serde::{Deserialize, Serialize};

use super::Document;
use crate::error::{Error, Result};

pub const DEFAULT_DOCS_PER_SHARD: usize = 10_000;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShardFile {
    /// Path relative to the shard directory, e.g. `fra/fra_00000.jsonl.gz`.
    pub name: String,
    pub documents: usize,
    pub bytes: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShardManifest {
    pub lang: String,
    pub files: Vec<ShardFile>,
}

impl ShardManifest {
    pub fn document_count(&self) -> usize {
        self.files.iter().map(|f| f.documents).sum()
    }
}

/// Writes `documents` as gzip-compressed JSONL under `<shard_dir>/<lang>/`,
/// starting a new `<lang>_<seq>.jsonl.gz` file every `docs_per_shard`
/// documents. Either every file of the call is persisted or none is.
pub fn write_shard<I>(
    documents: I,
    lang: &str,
    shard_dir: &Path,
    docs_per_shard: usize,
) -> Result<ShardManifest>
where
    I: IntoIterator<Item = Document>,
{
    let docs_per_shard = docs_per_shard.max(1);
    let lang_dir = shard_dir.join(lang);
    let mut manifest = ShardManifest {
        lang: lang.to_string(),
        files: Vec::new(),
    };
    let mut written: Vec<PathBuf> = Vec::new();

    let result = (|| -> Result<()> {
        let mut iter = documents.into_iter().peekable();
        let mut seq = 0usize;
        while iter.peek().is_some() {
            let name = format!("{lang}/{lang}_{seq:05}.jsonl.gz");
            let path = shard_dir.join(&name);
            let chunk = iter.by_ref().take(docs_per_shard).map(|doc| {
                if doc.lang.as_deref() != Some(lang) {
                    return Err(Error::LangMismatch {
                        id: doc.id.to_string(),
                        expected: lang.to_string(),
                        found: doc.lang.clone(),
                    });
                }
                Ok(doc)
            });
            fs::create_dir_all(&lang_dir).map_err(|e| Error::io(&lang_dir, e))?;
            let (documents, bytes) = write_gz_lines(&path, chunk)?;
            written.push(path);
            manifest.files.push(ShardFile {
                name,
                documents,
                bytes,
            });
            seq += 1;
        }
        Ok(())
    })();

    if let Err(e) = result {
        for path in &written {
            let _ = fs::remove_file(path);
        }
        return Err(e);
    }
    Ok(manifest)
}

/// Writes documents to a single gzip JSONL file at `path`, atomically.
/// Returns the number of documents written.
pub fn write_documents<'a, I>(path: &Path, documents: I) -> Result<usize>
where
    I: IntoIterator<Item = &'a Document>,
{
    let (count, _) = write_gz_lines(path, documents.into_iter().map(Ok))?;
    Ok(count)
}

fn write_gz_lines<D, I>(path: &Path, documents: I) -> Result<(usize, u64)>
where
    D: std::borrow::Borrow<Document>,
    I: Iterator<Item = Result<D>>,
{
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    let mut count = 0usize;
    {
        // GzEncoder writes mtime 0 and no file name, so output bytes depend
        // only on the content.
        let mut enc = GzEncoder::new(BufWriter::new(tmp.as_file()), Compression::default());
        for doc in documents {
            let doc = doc?;
            let line = doc.borrow().to_json_line()?;
            enc.write_all(line.as_bytes())
                .and_then(|_| enc.write_all(b"\n"))
                .map_err(|e| Error::io(path, e))?;
            count += 1;
        }
        let mut inner = enc.finish().map_err(|e| Error::io(path, e))?;
        inner.flush().map_err(|e| Error::io(path, e))?;
    }
    let bytes = tmp
        .as_file()
        .metadata()
        .map_err(|e| Error::io(path, e))?
        .len();
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok((count, bytes))
}

/// Streams documents back out of a file written by [`write_shard`] or
/// [`write_documents`].
pub fn read_shard(path: &Path) -> Result<ShardReader> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let empty = file.metadata().map_err(|e| Error::io(path, e))?.len() == 0;
    let inner: Box<dyn BufRead + Send> = if empty {
        Box::new(BufReader::new(std::io::empty()))
    } else {
        Box::new(BufReader::new(MultiGzDecoder::new(BufReader::new(file))))
    };
    Ok(ShardReader {
        path: path.to_path_buf(),
        inner,
        line: 0,
        buf: Vec::new(),
        done: false,
    })
}

/// Reads every document in `path` into memory.
pub fn read_documents(path: &Path) -> Result<Vec<Document>> {
    read_shard(path)?.collect()
}

pub struct ShardReader {
    path: PathBuf,
    inner: Box<dyn BufRead + Send>,
    line: usize,
    buf: Vec<u8>,
    done: bool,
}

impl ShardReader {
    fn malformed(&self, message: impl Into<String>) -> Error {
        Error::MalformedLine {
            path: self.path.clone(),
            line: self.line,
            message: message.into(),
        }
    }
}

impl Iterator for ShardReader {
    type Item = Result<Document>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            if self.done {
                return None;
            }
            self.buf.clear();
            match self.inner.read_until(b'\n', &mut self.buf) {
                Ok(0) => {
                    self.done = true;
                    return None;
                }
                Ok(_) => {}
                Err(e) => {
                    self.done = true;
                    return Some(Err(Error::io(&self.path, e)));
                }
            }
            self.line += 1;
            if self.buf.last() == Some(&b'\n') {
                self.buf.pop();
            }
            if self.buf.iter().all(u8::is_ascii_whitespace) {
                continue;
            }
            let text = match std::str::from_utf8(&self.buf) {
                Ok(t) => t,
                Err(e) => return Some(Err(self.malformed(format!("invalid UTF-8: {e}")))),
            };
            return Some(Document::from_json_line(text).map_err(|e| self.malformed(e.to_string())));
        }
    }
}
