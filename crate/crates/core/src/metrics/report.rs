use std::path::PathBuf;

use serde::Serialize;

use super::{distinct_ngram_ratio, distributions, node_offset_histogram, sample_indices, vendi_score};
use super::{DistRecord, Distributions, NgramDiversity, NodeOffsets};
use crate::corpus::{Document, ImageNode};
use crate::error::Result;
use crate::joint::DocDecisions;
use crate::scorer::Scorer;

#[derive(Clone, Debug)]
pub struct ReportOptions {
    /// Documents drawn for the n-gram and Vendi measurements.
    pub sample: usize,
    pub seed: u64,
    pub max_n: usize,
    pub token_bin: u64,
    pub image_bin: u64,
}

impl Default for ReportOptions {
    fn default() -> Self {
        ReportOptions {
            sample: 1000,
            seed: 0,
            max_n: 4,
            token_bin: 50,
            image_bin: 1,
        }
    }
}

/// Everything `metrics` writes, except the CSV histograms.
#[derive(Clone, Debug, Serialize)]
pub struct MetricsReport {
    pub seed: u64,
    pub documents: usize,
    pub sampled: usize,
    pub ngram: Option<NgramDiversity>,
    /// Over one embedding per sampled document (its joined text).
    pub text_vendi: Option<f64>,
    /// Over every image of the sampled documents with a stored file.
    pub image_vendi: Option<f64>,
    pub distributions: Distributions,
    pub offsets: Option<NodeOffsets>,
}

impl MetricsReport {
    /// (file name, contents) for the histogram CSVs.
    pub fn csv_files(&self) -> Vec<(String, String)> {
        let mut files = vec![
            ("tokens_per_doc.csv".to_string(), self.distributions.tokens.to_csv()),
            ("images_per_doc.csv".to_string(), self.distributions.images.to_csv()),
            ("tokens_images_joint.csv".to_string(), self.distributions.joint_csv()),
        ];
        if let Some(o) = &self.offsets {
            files.push(("image_partner_offsets.csv".into(), o.images.to_csv()));
            files.push(("text_partner_offsets.csv".into(), o.texts.to_csv()));
        }
        files
    }
}

/// Builds the report. Without a scorer the Vendi fields stay empty;
/// `image_path` maps an image node to its stored bytes, if any.
pub fn metrics_report<F>(
    docs: &[Document],
    decisions: Option<&[DocDecisions]>,
    scorer: Option<&dyn Scorer>,
    image_path: F,
    opts: &ReportOptions,
) -> Result<MetricsReport>
where
    F: Fn(&ImageNode) -> Option<PathBuf>,
{
    let records: Vec<DistRecord> = docs.iter().map(DistRecord::of).collect();
    let idx = sample_indices(docs.len(), opts.sample, opts.seed);
    let sample: Vec<&Document> = idx.iter().map(|&i| &docs[i]).collect();
    let texts: Vec<String> = sample.iter().map(|d| d.joined_text()).collect();
    let ngram = if texts.is_empty() {
        None
    } else {
        Some(distinct_ngram_ratio(texts.iter().map(String::as_str), opts.max_n)?)
    };

    let (mut text_vendi, mut image_vendi) = (None, None);
    if let Some(scorer) = scorer {
        let rows = texts.iter().map(|t| scorer.embed_text(t)).collect::<Result<Vec<_>>>()?;
        if !rows.is_empty() {
            text_vendi = Some(vendi_score(&rows)?);
        }
        let mut rows = Vec::new();
        for path in sample.iter().flat_map(|d| d.image_nodes()).filter_map(&image_path) {
            rows.push(scorer.embed_image(&path)?);
        }
        if !rows.is_empty() {
            image_vendi = Some(vendi_score(&rows)?);
        }
    }

    Ok(MetricsReport {
        seed: opts.seed,
        documents: docs.len(),
        sampled: sample.len(),
        ngram,
        text_vendi,
        image_vendi,
        distributions: distributions(&records, opts.token_bin, opts.image_bin),
        offsets: decisions.map(node_offset_histogram),
    })
}
