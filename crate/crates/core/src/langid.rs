//! Document language from per-text-node predictions, weighted by the
//! number of characters in each node.

use std::collections::BTreeMap;

use crate::corpus::Document;
use crate::error::{Error, Result};
use crate::scorer::{RetryPolicy, Scorer};

/// Classifier output for one text node.
#[derive(Clone, Debug, PartialEq)]
pub struct NodePrediction {
    /// Up to `top_k` (language, probability) pairs, most probable first.
    pub top: Vec<(String, f64)>,
    /// Unicode scalar values in the node.
    pub char_count: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LangVerdict {
    pub winner: String,
    pub table: BTreeMap<String, f64>,
}

impl LangVerdict {
    /// Scores sorted best first, ties by language code.
    pub fn ranked(&self) -> Vec<(String, f64)> {
        let mut out: Vec<_> = self.table.iter().map(|(k, v)| (k.clone(), *v)).collect();
        out.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        out
    }
}

/// Sums `p * char_count` per language over all nodes and picks the
/// highest total; ties go to the lexicographically smallest code.
pub fn aggregate(predictions: &[NodePrediction]) -> Result<LangVerdict> {
    if predictions.is_empty() {
        return Err(Error::NoText);
    }
    let mut table: BTreeMap<String, f64> = BTreeMap::new();
    for pred in predictions {
        for (lang, p) in &pred.top {
            *table.entry(lang.clone()).or_default() += p * pred.char_count as f64;
        }
    }
    let mut winner: Option<(&String, f64)> = None;
    for (lang, score) in &table {
        if winner.is_none_or(|(_, best)| *score > best) {
            winner = Some((lang, *score));
        }
    }
    let winner = winner.ok_or(Error::NoText)?.0.clone();
    Ok(LangVerdict { winner, table })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LidOptions {
    pub top_k: usize,
    pub retry: RetryPolicy,
}

impl Default for LidOptions {
    fn default() -> Self {
        LidOptions {
            top_k: 3,
            retry: RetryPolicy::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LidReject {
    NoText,
    Unavailable,
}

impl LidReject {
    pub fn as_str(self) -> &'static str {
        match self {
            LidReject::NoText => "no_text",
            LidReject::Unavailable => "lid_unavailable",
        }
    }
}

/// Runs the classifier over every text node and stores the aggregated
/// verdict in `lang` / `lang_scores`.
pub fn classify_document<S: Scorer + ?Sized>(
    mut doc: Document,
    scorer: &S,
    opts: &LidOptions,
) -> Result<Document, LidReject> {
    let mut predictions = Vec::new();
    for node in doc.text_nodes() {
        if node.text.is_empty() {
            continue;
        }
        let mut top = opts
            .retry
            .run(|| scorer.lid(&node.text))
            .map_err(|_| LidReject::Unavailable)?;
        top.truncate(opts.top_k);
        predictions.push(NodePrediction {
            top,
            char_count: node.text.chars().count(),
        });
    }
    let verdict = aggregate(&predictions).map_err(|_| LidReject::NoText)?;
    doc.lang_scores = verdict.ranked();
    doc.lang = Some(verdict.winner);
    Ok(doc)
}
