//! Polite image downloading: robots.txt, per-host rate limiting, size and
//! decode guards, and a content-addressed store.

mod fetcher;
mod robots;
mod store;
mod transport;

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

pub use fetcher::{
    fetch_all_blocking, FetchCounters, FetchOutcome, FetchPolicy, FetchResult, Fetcher, ImageRecord,
};
pub use robots::RobotsTxt;
pub use store::{ImageStore, IndexEntry, ScoreCache};
pub use transport::{HttpTransport, MirrorTransport, Reply, ReplyFuture, Transport};

use crate::corpus::{Document, Node};
use crate::error::Result;

/// Outcome tallies of one fetch pass, by unique URL and by image node.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FetchSummary {
    pub urls_in: u64,
    pub url_outcomes: BTreeMap<String, u64>,
    pub images_in: u64,
    pub image_drops: BTreeMap<String, u64>,
    pub requests: u64,
}

/// Fetches every distinct image URL of `docs` not already settled in the
/// store, then fills in digest, pHash and size of fetched images and removes
/// image nodes whose fetch failed.
pub fn fetch_document_images(
    docs: Vec<Document>,
    transport: Arc<dyn Transport>,
    policy: &FetchPolicy,
    store: &ImageStore,
) -> Result<(Vec<Document>, FetchSummary)> {
    let urls: BTreeSet<String> = docs
        .iter()
        .flat_map(|d| d.image_nodes().map(|i| i.url.clone()))
        .collect();
    let todo: Vec<String> = urls
        .iter()
        .filter(|u| !store.lookup(u).is_some_and(|e| e.is_final()))
        .cloned()
        .collect();
    let mut summary = FetchSummary {
        urls_in: urls.len() as u64,
        ..Default::default()
    };
    if !todo.is_empty() {
        let (results, fetcher) = fetch_all_blocking(transport, policy.clone(), todo)?;
        store.record(&results)?;
        summary.requests = fetcher
            .counters
            .requests
            .load(std::sync::atomic::Ordering::Relaxed);
    }
    for u in &urls {
        let outcome = store.lookup(u).map(|e| e.outcome).unwrap_or_else(|| "network_error".into());
        *summary.url_outcomes.entry(outcome).or_default() += 1;
    }

    let docs = docs
        .into_iter()
        .map(|mut doc| {
            doc.nodes.retain_mut(|n| {
                let Node::Image(img) = n else { return true };
                summary.images_in += 1;
                match store.lookup(&img.url) {
                    Some(e) if e.is_ok() => {
                        img.sha512 = e.sha512_bytes();
                        img.phash = e.phash_u64();
                        img.width = e.width;
                        img.height = e.height;
                        true
                    }
                    other => {
                        let reason = other.map(|e| e.outcome).unwrap_or_else(|| "network_error".into());
                        *summary.image_drops.entry(reason).or_default() += 1;
                        false
                    }
                }
            });
            doc
        })
        .collect();
    Ok((docs, summary))
}
