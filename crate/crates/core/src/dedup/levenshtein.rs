use crate::corpus::{Document, Node};

/// How edit distance is turned into a similarity ratio.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum LevConvention {
    /// `1 - dist / max(|a|, |b|)` with unit-cost substitutions.
    #[default]
    MaxLen,
    /// `1 - indel / (|a| + |b|)` where substitutions cost 2 (insert + delete).
    Indel,
}

/// Unit-cost Levenshtein distance over Unicode scalar values.
pub fn lev_distance(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    distance_chars(&a, &b, 1)
}

fn distance_chars(a: &[char], b: &[char], sub_cost: usize) -> usize {
    if a.is_empty() {
        return b.len();
    }
    if b.is_empty() {
        return a.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0usize; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let sub = prev[j] + if ca == cb { 0 } else { sub_cost };
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

pub fn lev_ratio(a: &str, b: &str, convention: LevConvention) -> f64 {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    ratio_chars(&a, &b, convention)
}

fn ratio_chars(a: &[char], b: &[char], convention: LevConvention) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    match convention {
        LevConvention::MaxLen => {
            let d = distance_chars(a, b, 1);
            1.0 - d as f64 / a.len().max(b.len()) as f64
        }
        LevConvention::Indel => {
            let d = distance_chars(a, b, 2);
            1.0 - d as f64 / (a.len() + b.len()) as f64
        }
    }
}

/// Best ratio reachable given only the lengths; lets most pairs skip the DP.
fn ratio_upper_bound(la: usize, lb: usize, convention: LevConvention) -> f64 {
    let diff = la.abs_diff(lb) as f64;
    match convention {
        LevConvention::MaxLen => 1.0 - diff / la.max(lb).max(1) as f64,
        LevConvention::Indel => 1.0 - diff / (la + lb).max(1) as f64,
    }
}

const EPS: f64 = 1e-12;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct NodeDedupCounts {
    pub exact: usize,
    pub near: usize,
}

/// Drops exact-duplicate text nodes, then any text node whose ratio to an
/// earlier kept node reaches `threshold`. The first occurrence always wins;
/// image nodes are untouched.
pub fn node_dedup(
    mut doc: Document,
    threshold: f64,
    convention: LevConvention,
) -> (Document, NodeDedupCounts) {
    let mut counts = NodeDedupCounts::default();
    let mut seen = std::collections::HashSet::new();
    let mut keep = vec![true; doc.nodes.len()];
    for (i, node) in doc.nodes.iter().enumerate() {
        if let Node::Text(t) = node {
            if !seen.insert(t.text.as_str()) {
                keep[i] = false;
                counts.exact += 1;
            }
        }
    }

    let mut kept_texts: Vec<Vec<char>> = Vec::new();
    for (i, node) in doc.nodes.iter().enumerate() {
        let Node::Text(t) = node else { continue };
        if !keep[i] {
            continue;
        }
        let chars: Vec<char> = t.text.chars().collect();
        let near = kept_texts.iter().any(|k| {
            ratio_upper_bound(k.len(), chars.len(), convention) + EPS >= threshold
                && ratio_chars(k, &chars, convention) + EPS >= threshold
        });
        if near {
            keep[i] = false;
            counts.near += 1;
        } else {
            kept_texts.push(chars);
        }
    }

    let mut flags = keep.into_iter();
    doc.nodes.retain(|_| flags.next().unwrap());
    (doc, counts)
}
