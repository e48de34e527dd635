use std::collections::HashSet;

use sha2::{Digest, Sha256};

use crate::corpus::Document;

/// Keep-first exact dedup on the newline-joined text, scoped per language.
#[derive(Debug, Default)]
pub struct ExactDedup {
    seen: HashSet<(String, [u8; 32])>,
}

impl ExactDedup {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns true if the document is new and should be kept.
    pub fn admit(&mut self, doc: &Document) -> bool {
        let digest: [u8; 32] = Sha256::digest(doc.joined_text().as_bytes()).into();
        let lang = doc.lang.clone().unwrap_or_default();
        self.seen.insert((lang, digest))
    }
}

/// Streams `docs`, dropping any whose text was already seen in the same
/// language.
pub fn exact_doc_dedup<I>(docs: I) -> impl Iterator<Item = Document>
where
    I: IntoIterator<Item = Document>,
{
    let mut state = ExactDedup::new();
    docs.into_iter().filter(move |d| state.admit(d))
}
