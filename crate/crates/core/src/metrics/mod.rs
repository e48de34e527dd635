//! Corpus metrology: Vendi score, distinct n-gram ratio, token/image
//! distributions and joint-filter partner offsets.

mod distributions;
mod ngram;
mod offsets;
mod report;
mod vendi;

pub use distributions::{distributions, summarize, DistRecord, Distributions, Histogram, LangTally, Summary};
pub use ngram::{distinct_ngram_ratio, tokenize, NgramDiversity};
pub use offsets::{node_offset_histogram, NodeOffsets, OffsetHistogram};
pub use report::{metrics_report, MetricsReport, ReportOptions};
pub use vendi::{entropy_exp, vendi_score};

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Seeded subsample of at most `k` indices out of `n`, in ascending order.
pub fn sample_indices(n: usize, k: usize, seed: u64) -> Vec<usize> {
    if n <= k {
        return (0..n).collect();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = sample(&mut rng, n, k).into_vec();
    idx.sort_unstable();
    idx
}
