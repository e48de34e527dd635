use std::collections::{HashMap, HashSet};

use crate::corpus::{Document, Node};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ImageDedupCounts {
    pub url_in_doc: u64,
    pub phash_in_doc: u64,
    pub capped: u64,
}

/// Drops later images repeating an earlier image's URL, then later images
/// repeating an earlier pHash, within one document.
pub fn dedup_within_document(mut doc: Document) -> (Document, ImageDedupCounts) {
    let mut counts = ImageDedupCounts::default();
    let mut urls = HashSet::new();
    doc.nodes.retain(|n| match n {
        Node::Image(img) if !urls.insert(img.url.clone()) => {
            counts.url_in_doc += 1;
            false
        }
        _ => true,
    });
    let mut hashes = HashSet::new();
    doc.nodes.retain(|n| match n {
        Node::Image(img) => match img.phash {
            Some(h) if !hashes.insert(h) => {
                counts.phash_in_doc += 1;
                false
            }
            _ => true,
        },
        _ => true,
    });
    (doc, counts)
}

/// Per-language occurrence caps: a URL, and independently a pHash, may be
/// kept in at most `cap` documents. Documents must be fed in stream order.
#[derive(Debug, Default)]
pub struct LanguageCaps {
    cap: usize,
    by_url: HashMap<String, usize>,
    by_phash: HashMap<u64, usize>,
}

impl LanguageCaps {
    pub fn new(cap: usize) -> Self {
        LanguageCaps {
            cap,
            ..Default::default()
        }
    }

    /// Removes images whose URL or pHash has already been kept in `cap`
    /// documents; counts the survivors. Returns how many were removed.
    pub fn apply(&mut self, doc: &mut Document) -> u64 {
        let mut removed = 0;
        let mut seen_url = HashSet::new();
        let mut seen_phash = HashSet::new();
        doc.nodes.retain(|n| {
            let Node::Image(img) = n else { return true };
            let url_full = !seen_url.contains(&img.url)
                && self.by_url.get(&img.url).copied().unwrap_or(0) >= self.cap;
            let phash_full = img.phash.is_some_and(|h| {
                !seen_phash.contains(&h) && self.by_phash.get(&h).copied().unwrap_or(0) >= self.cap
            });
            if url_full || phash_full {
                removed += 1;
                return false;
            }
            if seen_url.insert(img.url.clone()) {
                *self.by_url.entry(img.url.clone()).or_default() += 1;
            }
            if let Some(h) = img.phash {
                if seen_phash.insert(h) {
                    *self.by_phash.entry(h).or_default() += 1;
                }
            }
            true
        });
        removed
    }
}

/// Within-document dedup followed by the per-language cap, over documents
/// of one language in stream order.
pub fn image_dedup(docs: Vec<Document>, cap: usize) -> (Vec<Document>, ImageDedupCounts) {
    let mut caps = LanguageCaps::new(cap);
    let mut total = ImageDedupCounts::default();
    let out = docs
        .into_iter()
        .map(|d| {
            let (mut d, c) = dedup_within_document(d);
            total.url_in_doc += c.url_in_doc;
            total.phash_in_doc += c.phash_in_doc;
            total.capped += caps.apply(&mut d);
            d
        })
        .collect();
    (out, total)
}
