//! Retrieval-style text/image consistency filter: every text node and
//! image must rank in the top 8 of 64 against sampled negatives for at
//! least one partner in its own document.

mod judge;
mod pool;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use judge::{dot, judge, judge_image, judge_text_node, rank_threshold, PairDecision};
pub use pool::{
    closest_by_length, sample_image_negatives, sample_text_negatives, ImageEntry, NegativePool,
    Reservoir, TextEntry,
};

use crate::corpus::{doc_text_bytes, DocId, Document, ImageNode, Node};
use crate::error::{Error, Result};
use crate::scorer::{normalize, RetryPolicy, Scorer};

#[derive(Clone, Debug, PartialEq)]
pub struct JointConfig {
    pub negatives: usize,
    pub top: usize,
    pub pool_cap: usize,
    pub seed: u64,
    /// Fill the pools from the whole stream before judging anything.
    pub two_pass: bool,
    /// Relative byte-length window defining "similar-length" paragraphs.
    pub length_tolerance: f64,
    pub min_doc_bytes: usize,
    pub retry: RetryPolicy,
}

impl Default for JointConfig {
    fn default() -> Self {
        JointConfig {
            negatives: 63,
            top: 8,
            pool_cap: 10_000,
            seed: 0,
            two_pass: false,
            length_tolerance: 0.5,
            min_doc_bytes: 100,
            retry: RetryPolicy::default(),
        }
    }
}

/// Unit embeddings of one document's nodes, keyed by node position.
#[derive(Clone, Debug)]
pub struct DocEmbeddings {
    pub texts: Vec<(usize, Arc<[f32]>)>,
    pub images: Vec<(usize, Arc<[f32]>)>,
}

/// Embeds every text node and image of `doc`, re-normalizing defensively.
/// `image_path` maps an image node to its stored file.
pub fn embed_document<S, F>(doc: &Document, scorer: &S, image_path: F, retry: &RetryPolicy) -> Result<DocEmbeddings>
where
    S: Scorer + ?Sized,
    F: Fn(&ImageNode) -> Option<PathBuf>,
{
    let mut texts = Vec::new();
    let mut images = Vec::new();
    for (pos, node) in doc.nodes.iter().enumerate() {
        let mut v = match node {
            Node::Text(t) => retry.run(|| scorer.embed_text(&t.text))?,
            Node::Image(img) => {
                let path = image_path(img)
                    .ok_or_else(|| Error::Scorer(format!("no stored file for image {}", img.url)))?;
                retry.run(|| scorer.embed_image(&path))?
            }
        };
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite(pos));
        }
        normalize(&mut v);
        let v: Arc<[f32]> = Arc::from(v);
        match node {
            Node::Text(_) => texts.push((pos, v)),
            Node::Image(_) => images.push((pos, v)),
        }
    }
    Ok(DocEmbeddings { texts, images })
}

/// Reason a document left the joint filter.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum JointReject {
    NoImages,
    NoText,
    TooSmall,
    ScorerError,
}

impl JointReject {
    pub fn as_str(self) -> &'static str {
        match self {
            JointReject::NoImages => "no_images",
            JointReject::NoText => "no_text",
            JointReject::TooSmall => "too_small",
            JointReject::ScorerError => "scorer_error",
        }
    }
}

/// Removes nodes judged invalid, then applies the final document gate.
pub fn apply_joint_filter(
    mut doc: Document,
    decisions: &[PairDecision],
    min_doc_bytes: usize,
) -> Result<Document, JointReject> {
    let invalid: std::collections::HashSet<usize> =
        decisions.iter().filter(|d| !d.valid).map(|d| d.node).collect();
    let mut pos = 0;
    doc.nodes.retain(|_| {
        let keep = !invalid.contains(&pos);
        pos += 1;
        keep
    });
    if doc.image_node_count() == 0 {
        return Err(JointReject::NoImages);
    }
    if doc.text_node_count() == 0 {
        return Err(JointReject::NoText);
    }
    if doc_text_bytes(&doc) < min_doc_bytes {
        return Err(JointReject::TooSmall);
    }
    Ok(doc)
}

/// All decisions taken for one document, for offset analysis.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocDecisions {
    pub doc: DocId,
    pub lang: String,
    pub text: Vec<PairDecision>,
    pub image: Vec<PairDecision>,
}

#[derive(Debug, Default)]
pub struct JointReport {
    pub kept: Vec<Document>,
    pub dropped: Vec<(DocId, JointReject)>,
    pub decisions: Vec<DocDecisions>,
    pub text_nodes_in: u64,
    pub text_nodes_dropped: u64,
    pub images_in: u64,
    pub images_dropped: u64,
}

impl JointReport {
    pub fn drop_reasons(&self) -> BTreeMap<&'static str, u64> {
        let mut out = BTreeMap::new();
        for (_, r) in &self.dropped {
            *out.entry(r.as_str()).or_default() += 1;
        }
        out
    }
}

fn doc_rng(seed: u64, id: DocId) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ (id.0 as u64) ^ ((id.0 >> 64) as u64).rotate_left(32))
}

fn offer(pool: &mut NegativePool, lang: &str, doc: &Document, emb: &DocEmbeddings) {
    for (pos, e) in &emb.texts {
        let len = doc.nodes[*pos].as_text().map_or(0, |t| t.text.len());
        pool.offer_text(
            lang,
            TextEntry {
                doc: doc.id,
                len,
                emb: e.clone(),
            },
        );
    }
    for (_, e) in &emb.images {
        pool.offer_image(
            lang,
            ImageEntry {
                doc: doc.id,
                emb: e.clone(),
            },
        );
    }
}

/// Judges every node of `doc` against one snapshot of the pool.
pub fn judge_document(
    doc: &Document,
    emb: &DocEmbeddings,
    pool: &NegativePool,
    cfg: &JointConfig,
) -> DocDecisions {
    let lang = doc.lang.clone().unwrap_or_default();
    let mut rng = doc_rng(cfg.seed, doc.id);
    let image_negs = sample_image_negatives(pool.images(&lang), doc.id, cfg.negatives, &mut rng);
    let mean_len = {
        let lens: Vec<usize> = doc.text_nodes().map(|t| t.text.len()).collect();
        lens.iter().sum::<usize>() as f64 / lens.len().max(1) as f64
    };
    let text_negs = sample_text_negatives(
        pool.texts(&lang),
        doc.id,
        mean_len,
        cfg.length_tolerance,
        cfg.negatives,
        &mut rng,
    );
    let text = emb
        .texts
        .iter()
        .filter_map(|(pos, e)| judge_text_node(*pos, e, &emb.images, &image_negs, cfg.top, cfg.negatives))
        .collect();
    let image = emb
        .images
        .iter()
        .filter_map(|(pos, e)| judge_image(*pos, e, &emb.texts, &text_negs, cfg.top, cfg.negatives))
        .collect();
    DocDecisions {
        doc: doc.id,
        lang,
        text,
        image,
    }
}

/// Runs the filter over a stream. Embedding is parallel (in the current
/// rayon pool); pool updates and judging follow stream order so the
/// result does not depend on the thread count.
pub fn joint_filter<S, F>(docs: Vec<Document>, scorer: &S, image_path: F, cfg: &JointConfig) -> JointReport
where
    S: Scorer + ?Sized,
    F: Fn(&ImageNode) -> Option<PathBuf> + Sync,
{
    let embeddings: Vec<Option<Result<DocEmbeddings>>> = docs
        .par_iter()
        .map(|d| {
            (d.text_node_count() > 0 && d.image_node_count() > 0)
                .then(|| embed_document(d, scorer, &image_path, &cfg.retry))
        })
        .collect();

    let mut pool = NegativePool::new(cfg.pool_cap, cfg.seed);
    if cfg.two_pass {
        for (d, e) in docs.iter().zip(&embeddings) {
            if let Some(Ok(e)) = e {
                offer(&mut pool, d.lang.as_deref().unwrap_or_default(), d, e);
            }
        }
    }

    let mut report = JointReport::default();
    for (doc, emb) in docs.into_iter().zip(embeddings) {
        report.text_nodes_in += doc.text_node_count() as u64;
        report.images_in += doc.image_node_count() as u64;
        let decisions = match emb {
            Some(Ok(e)) => {
                let d = judge_document(&doc, &e, &pool, cfg);
                if !cfg.two_pass {
                    offer(&mut pool, doc.lang.as_deref().unwrap_or_default(), &doc, &e);
                }
                Some(d)
            }
            Some(Err(e)) => {
                log::warn!("document {} dropped: {e}", doc.id);
                report.text_nodes_dropped += doc.text_node_count() as u64;
                report.images_dropped += doc.image_node_count() as u64;
                report.dropped.push((doc.id, JointReject::ScorerError));
                continue;
            }
            None => None,
        };
        let all: Vec<PairDecision> = decisions
            .iter()
            .flat_map(|d| d.text.iter().chain(&d.image).copied())
            .collect();
        let (t_before, i_before) = (doc.text_node_count(), doc.image_node_count());
        let id = doc.id;
        match apply_joint_filter(doc, &all, cfg.min_doc_bytes) {
            Ok(kept) => {
                report.text_nodes_dropped += (t_before - kept.text_node_count()) as u64;
                report.images_dropped += (i_before - kept.image_node_count()) as u64;
                report.kept.push(kept);
            }
            Err(r) => {
                report.text_nodes_dropped += t_before as u64;
                report.images_dropped += i_before as u64;
                report.dropped.push((id, r));
            }
        }
        if let Some(d) = decisions {
            report.decisions.push(d);
        }
    }
    report
}
