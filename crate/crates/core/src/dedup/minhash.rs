use std::collections::{BTreeSet, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::DocId;

/// Modulus of the universal hash family, the Mersenne prime 2^61 - 1.
pub const MERSENNE_61: u64 = (1 << 61) - 1;

/// Character n-gram hashing settings, mirroring a word-boundary
/// character analyzer feeding a hashing vectorizer.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FeatureConfig {
    pub ngram_min: usize,
    pub ngram_max: usize,
    pub num_features: u32,
    pub lowercase: bool,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            ngram_min: 4,
            ngram_max: 5,
            num_features: 2_097_152,
            lowercase: true,
        }
    }
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= *b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Hashed character n-grams taken within word boundaries. Each word is
/// padded with one space on either side; a padded word shorter than `n`
/// contributes itself once.
pub fn feature_set(text: &str, cfg: &FeatureConfig) -> BTreeSet<u32> {
    let text = if cfg.lowercase {
        text.to_lowercase()
    } else {
        text.to_string()
    };
    let mut out = BTreeSet::new();
    let mut gram = String::new();
    for word in text.split_whitespace() {
        let padded: Vec<char> = std::iter::once(' ')
            .chain(word.chars())
            .chain(std::iter::once(' '))
            .collect();
        for n in cfg.ngram_min..=cfg.ngram_max {
            let mut emit = |chars: &[char]| {
                gram.clear();
                gram.extend(chars);
                out.insert((fnv1a64(gram.as_bytes()) % cfg.num_features as u64) as u32);
            };
            if padded.len() <= n {
                emit(&padded);
                break;
            }
            for window in padded.windows(n) {
                emit(window);
            }
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct MinHashSignature(pub Vec<u64>);

impl MinHashSignature {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Fraction of slots on which two signatures agree.
pub fn estimate_jaccard(a: &MinHashSignature, b: &MinHashSignature) -> f64 {
    assert_eq!(a.len(), b.len(), "signature lengths differ");
    let same = a.0.iter().zip(&b.0).filter(|(x, y)| x == y).count();
    same as f64 / a.len() as f64
}

/// MinHash over `num_perm` universal hashes `(a*x + b) mod (2^61 - 1)`
/// whose coefficients come from a seeded generator.
#[derive(Clone, Debug)]
pub struct MinHasher {
    coeffs: Vec<(u64, u64)>,
    seed: u64,
}

impl MinHasher {
    pub fn new(num_perm: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let coeffs = (0..num_perm)
            .map(|_| {
                (
                    rng.random_range(1..MERSENNE_61),
                    rng.random_range(0..MERSENNE_61),
                )
            })
            .collect();
        MinHasher { coeffs, seed }
    }

    pub fn num_perm(&self) -> usize {
        self.coeffs.len()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Empty input gives a signature of all `u64::MAX`.
    pub fn signature<'a, I>(&self, features: I) -> MinHashSignature
    where
        I: IntoIterator<Item = &'a u32>,
    {
        let mut slots = vec![u64::MAX; self.coeffs.len()];
        for &f in features {
            let x = f as u128;
            for (slot, &(a, b)) in slots.iter_mut().zip(&self.coeffs) {
                let h = ((a as u128 * x + b as u128) % MERSENNE_61 as u128) as u64;
                if h < *slot {
                    *slot = h;
                }
            }
        }
        MinHashSignature(slots)
    }
}

/// Banding of a signature: `bands` tables, each keyed on `rows` slots.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LshParams {
    pub bands: usize,
    pub rows: usize,
}

impl LshParams {
    /// Probability that a pair with Jaccard `j` collides in at least one band.
    pub fn collision_probability(&self, j: f64) -> f64 {
        1.0 - (1.0 - j.powi(self.rows as i32)).powi(self.bands as i32)
    }
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, intervals: usize) -> f64 {
    let n = intervals + intervals % 2;
    let h = (b - a) / n as f64;
    let mut sum = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * f(a + i as f64 * h);
    }
    sum * h / 3.0
}

/// Picks `(bands, rows)` with `bands * rows <= num_perm` minimizing the
/// equally weighted false-positive area below `threshold` plus the
/// false-negative area above it.
pub fn optimal_params(threshold: f64, num_perm: usize) -> LshParams {
    let mut best = (f64::INFINITY, LshParams { bands: 1, rows: 1 });
    for bands in 1..=num_perm {
        for rows in 1..=num_perm / bands {
            let p = LshParams { bands, rows };
            let fp = simpson(|s| p.collision_probability(s), 0.0, threshold, 200);
            let fn_ = simpson(|s| 1.0 - p.collision_probability(s), threshold, 1.0, 200);
            let err = 0.5 * fp + 0.5 * fn_;
            if err < best.0 {
                best = (err, p);
            }
        }
    }
    best.1
}

/// Banded index with keep-first semantics: a document colliding with any
/// earlier member is reported as a duplicate and not inserted.
#[derive(Debug)]
pub struct LshIndex {
    params: LshParams,
    tables: Vec<HashMap<u64, DocId>>,
    members: Vec<DocId>,
}

impl LshIndex {
    pub fn new(params: LshParams) -> Self {
        LshIndex {
            params,
            tables: (0..params.bands).map(|_| HashMap::new()).collect(),
            members: Vec::new(),
        }
    }

    pub fn params(&self) -> LshParams {
        self.params
    }

    /// Members in insertion order.
    pub fn members(&self) -> &[DocId] {
        &self.members
    }

    fn band_keys(&self, sig: &MinHashSignature) -> Vec<u64> {
        let r = self.params.rows;
        (0..self.params.bands)
            .map(|b| {
                let mut bytes = Vec::with_capacity(r * 8);
                for slot in &sig.0[b * r..(b + 1) * r] {
                    bytes.extend_from_slice(&slot.to_le_bytes());
                }
                fnv1a64(&bytes)
            })
            .collect()
    }

    /// Returns the earliest member sharing a band with `sig`, or inserts
    /// `id` and returns `None`.
    pub fn insert(&mut self, id: DocId, sig: &MinHashSignature) -> Option<DocId> {
        assert!(
            sig.len() >= self.params.bands * self.params.rows,
            "signature shorter than bands * rows"
        );
        let keys = self.band_keys(sig);
        let hit = keys
            .iter()
            .zip(&self.tables)
            .filter_map(|(k, t)| t.get(k).copied())
            .min_by_key(|id| self.members.iter().position(|m| m == id));
        if hit.is_some() {
            return hit;
        }
        for (k, t) in keys.into_iter().zip(self.tables.iter_mut()) {
            t.entry(k).or_insert(id);
        }
        self.members.push(id);
        None
    }
}

/// Ids to drop from one language's stream of signatures, in stream order.
pub fn lsh_dedup<I>(signatures: I, params: LshParams) -> BTreeSet<DocId>
where
    I: IntoIterator<Item = (DocId, MinHashSignature)>,
{
    let mut index = LshIndex::new(params);
    signatures
        .into_iter()
        .filter_map(|(id, sig)| index.insert(id, &sig).map(|_| id))
        .collect()
}
