use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::corpus::{Document, Node};
use crate::error::{Error, Result};

use super::phash::phash_path;

/// pHashes of benchmark images. Matching is exact 64-bit equality.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ContaminationSet {
    pub phashes: BTreeSet<u64>,
}

impl ContaminationSet {
    pub fn is_empty(&self) -> bool {
        self.phashes.is_empty()
    }

    pub fn contains(&self, phash: u64) -> bool {
        self.phashes.contains(&phash)
    }

    /// One lowercase hex16 pHash per line; blank lines and `#` comments
    /// are ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let mut phashes = BTreeSet::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if line.len() != 16 {
                return Err(Error::Config(format!(
                    "contamination line {}: expected 16 hex digits, got {line:?}",
                    i + 1
                )));
            }
            let h = u64::from_str_radix(line, 16)
                .map_err(|e| Error::Config(format!("contamination line {}: {e}", i + 1)))?;
            phashes.insert(h);
        }
        Ok(ContaminationSet { phashes })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
        let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
        for h in &self.phashes {
            writeln!(tmp, "{h:016x}").map_err(|e| Error::io(path, e))?;
        }
        tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
        Ok(())
    }
}

fn collect_files(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.is_dir() {
            collect_files(&path, out)?;
        } else {
            out.push(path);
        }
    }
    Ok(())
}

/// Hashes every decodable image under `dir` (recursively). Files that do
/// not decode are skipped and returned so the caller can report them.
pub fn build_contamination(dir: &Path) -> Result<(ContaminationSet, Vec<PathBuf>)> {
    let mut files = Vec::new();
    collect_files(dir, &mut files)?;
    files.sort();
    let mut set = ContaminationSet::default();
    let mut skipped = Vec::new();
    for f in files {
        match phash_path(&f) {
            Ok(h) => {
                set.phashes.insert(h);
            }
            Err(Error::ImageDecode(_)) => skipped.push(f),
            Err(e) => return Err(e),
        }
    }
    Ok((set, skipped))
}

/// Removes images whose pHash is in the set. The document itself is kept
/// even if no image remains; the joint filter's final gate drops it.
pub fn decontaminate(mut doc: Document, set: &ContaminationSet) -> (Document, u64) {
    let before = doc.nodes.len();
    doc.nodes.retain(|n| match n {
        Node::Image(img) => !img.phash.is_some_and(|h| set.contains(h)),
        Node::Text(_) => true,
    });
    let removed = (before - doc.nodes.len()) as u64;
    (doc, removed)
}
