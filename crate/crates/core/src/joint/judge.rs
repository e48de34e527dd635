use std::sync::Arc;

use serde::{Deserialize, Serialize};

/// Verdict for one node: its best rank against any partner of the other
/// modality in the same document.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairDecision {
    /// Position of the node in the document.
    pub node: usize,
    pub valid: bool,
    pub best_rank: usize,
    /// Position of the partner achieving `best_rank`.
    pub partner: usize,
    pub threshold: usize,
}

pub fn dot(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(x, y)| *x as f64 * *y as f64).sum()
}

/// Rank cut-off for `k` negatives when a full set is `full` negatives with
/// cut-off `top`: keeps the `top / (full + 1)` quantile for thin pools.
pub fn rank_threshold(top: usize, full: usize, k: usize) -> usize {
    if k >= full {
        top
    } else {
        (top * (k + 1)).div_ceil(full + 1)
    }
}

/// Ranks `candidate` against each partner among the negatives: rank is one
/// plus the number of negatives scoring strictly higher, so ties favour the
/// candidate. Returns `None` if there are no partners.
pub fn judge(
    node: usize,
    candidate: &[f32],
    partners: &[(usize, Arc<[f32]>)],
    negatives: &[Arc<[f32]>],
    threshold: usize,
) -> Option<PairDecision> {
    let neg_scores: Vec<f64> = negatives.iter().map(|n| dot(candidate, n)).collect();
    let mut best: Option<(usize, usize)> = None;
    for (pos, emb) in partners {
        let s = dot(candidate, emb);
        let rank = 1 + neg_scores.iter().filter(|&&n| n > s).count();
        if best.is_none_or(|(r, _)| rank < r) {
            best = Some((rank, *pos));
        }
    }
    best.map(|(best_rank, partner)| PairDecision {
        node,
        valid: best_rank <= threshold,
        best_rank,
        partner,
        threshold,
    })
}

/// Text node against the document's images and image negatives.
pub fn judge_text_node(
    node: usize,
    emb: &[f32],
    doc_images: &[(usize, Arc<[f32]>)],
    negatives: &[Arc<[f32]>],
    top: usize,
    full: usize,
) -> Option<PairDecision> {
    judge(node, emb, doc_images, negatives, rank_threshold(top, full, negatives.len()))
}

/// Image against the document's paragraphs and paragraph negatives.
pub fn judge_image(
    node: usize,
    emb: &[f32],
    doc_texts: &[(usize, Arc<[f32]>)],
    negatives: &[Arc<[f32]>],
    top: usize,
    full: usize,
) -> Option<PairDecision> {
    judge(node, emb, doc_texts, negatives, rank_threshold(top, full, negatives.len()))
}
