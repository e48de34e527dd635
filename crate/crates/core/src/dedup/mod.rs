//! Deduplication tiers: exact document hashes, within-document node
//! dedup (exact and Levenshtein), and per-language MinHash LSH.

mod exact;
mod levenshtein;
mod minhash;

pub use exact::{exact_doc_dedup, ExactDedup};
pub use levenshtein::{lev_distance, lev_ratio, node_dedup, LevConvention, NodeDedupCounts};
pub use minhash::{
    estimate_jaccard, feature_set, lsh_dedup, optimal_params, FeatureConfig, LshIndex, LshParams,
    MinHashSignature, MinHasher, MERSENNE_61,
};
