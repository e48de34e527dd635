use std::collections::BTreeMap;
use std::sync::Arc;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::DocId;

/// Uniform sample of a stream with fixed capacity (Algorithm R).
#[derive(Clone, Debug)]
pub struct Reservoir<T> {
    cap: usize,
    seen: u64,
    items: Vec<T>,
    rng: ChaCha8Rng,
}

impl<T> Reservoir<T> {
    pub fn new(cap: usize, seed: u64) -> Self {
        Reservoir {
            cap,
            seen: 0,
            items: Vec::new(),
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn offer(&mut self, item: T) {
        self.seen += 1;
        if self.items.len() < self.cap {
            self.items.push(item);
        } else if self.cap > 0 {
            let j = self.rng.random_range(0..self.seen);
            if (j as usize) < self.cap {
                self.items[j as usize] = item;
            }
        }
    }

    pub fn items(&self) -> &[T] {
        &self.items
    }

    pub fn seen(&self) -> u64 {
        self.seen
    }
}

#[derive(Clone, Debug)]
pub struct TextEntry {
    pub doc: DocId,
    pub len: usize,
    pub emb: Arc<[f32]>,
}

#[derive(Clone, Debug)]
pub struct ImageEntry {
    pub doc: DocId,
    pub emb: Arc<[f32]>,
}

/// Per-language reservoirs of paragraph and image embeddings used as
/// negatives.
#[derive(Debug)]
pub struct NegativePool {
    cap: usize,
    seed: u64,
    texts: BTreeMap<String, Reservoir<TextEntry>>,
    images: BTreeMap<String, Reservoir<ImageEntry>>,
}

fn lang_seed(seed: u64, lang: &str, salt: u64) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325 ^ salt;
    for b in lang.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    seed ^ h
}

impl NegativePool {
    pub fn new(cap: usize, seed: u64) -> Self {
        NegativePool {
            cap,
            seed,
            texts: BTreeMap::new(),
            images: BTreeMap::new(),
        }
    }

    pub fn offer_text(&mut self, lang: &str, entry: TextEntry) {
        let (cap, seed) = (self.cap, lang_seed(self.seed, lang, 1));
        self.texts
            .entry(lang.to_string())
            .or_insert_with(|| Reservoir::new(cap, seed))
            .offer(entry);
    }

    pub fn offer_image(&mut self, lang: &str, entry: ImageEntry) {
        let (cap, seed) = (self.cap, lang_seed(self.seed, lang, 2));
        self.images
            .entry(lang.to_string())
            .or_insert_with(|| Reservoir::new(cap, seed))
            .offer(entry);
    }

    pub fn texts(&self, lang: &str) -> &[TextEntry] {
        self.texts.get(lang).map(|r| r.items()).unwrap_or(&[])
    }

    pub fn images(&self, lang: &str) -> &[ImageEntry] {
        self.images.get(lang).map(|r| r.items()).unwrap_or(&[])
    }
}

/// Up to `k` image negatives from other documents, sampled uniformly.
pub fn sample_image_negatives(
    pool: &[ImageEntry],
    exclude: DocId,
    k: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<Arc<[f32]>> {
    let others: Vec<&ImageEntry> = pool.iter().filter(|e| e.doc != exclude).collect();
    if others.len() <= k {
        return others.into_iter().map(|e| e.emb.clone()).collect();
    }
    sample(rng, others.len(), k)
        .into_iter()
        .map(|i| others[i].emb.clone())
        .collect()
}

/// Up to `k` paragraph negatives from other documents whose byte length is
/// within `tolerance` (relative) of `mean_len`. When fewer than `k` such
/// paragraphs exist, the `k` closest in length are used instead.
pub fn sample_text_negatives(
    pool: &[TextEntry],
    exclude: DocId,
    mean_len: f64,
    tolerance: f64,
    k: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<Arc<[f32]>> {
    let others: Vec<&TextEntry> = pool.iter().filter(|e| e.doc != exclude).collect();
    let lo = mean_len * (1.0 - tolerance);
    let hi = mean_len * (1.0 + tolerance);
    let similar: Vec<&TextEntry> = others
        .iter()
        .copied()
        .filter(|e| (lo..=hi).contains(&(e.len as f64)))
        .collect();
    if similar.len() >= k {
        return sample(rng, similar.len(), k)
            .into_iter()
            .map(|i| similar[i].emb.clone())
            .collect();
    }
    closest_by_length(&others, mean_len, k)
        .into_iter()
        .map(|e| e.emb.clone())
        .collect()
}

/// The `k` entries with the smallest |len − target|; ties keep pool order.
pub fn closest_by_length<'a>(entries: &[&'a TextEntry], target: f64, k: usize) -> Vec<&'a TextEntry> {
    let mut order: Vec<usize> = (0..entries.len()).collect();
    order.sort_by(|&a, &b| {
        let da = (entries[a].len as f64 - target).abs();
        let db = (entries[b].len as f64 - target).abs();
        da.total_cmp(&db).then(a.cmp(&b))
    });
    order.truncate(k);
    order.into_iter().map(|i| entries[i]).collect()
}
