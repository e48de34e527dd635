use std::collections::BTreeMap;

use serde::Serialize;

use crate::joint::DocDecisions;

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct OffsetHistogram {
    /// offset = position(best partner) − position(node) → count.
    pub bins: BTreeMap<i64, u64>,
    /// Share of nodes whose best partner lies within ±5 positions.
    pub within_5: Option<f64>,
}

impl OffsetHistogram {
    fn from_offsets(offsets: impl IntoIterator<Item = i64>) -> Self {
        let mut bins = BTreeMap::new();
        for o in offsets {
            *bins.entry(o).or_default() += 1;
        }
        let total: u64 = bins.values().sum();
        let near: u64 = bins.range(-5..=5).map(|(_, c)| c).sum();
        OffsetHistogram {
            within_5: (total > 0).then(|| near as f64 / total as f64),
            bins,
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("offset,count\n");
        for (o, c) in &self.bins {
            out.push_str(&format!("{o},{c}\n"));
        }
        out
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct NodeOffsets {
    pub images: OffsetHistogram,
    pub texts: OffsetHistogram,
}

/// Where the best-ranked partner of each image (and text node) sits
/// relative to it in the document.
pub fn node_offset_histogram(decisions: &[DocDecisions]) -> NodeOffsets {
    let off = |d: &crate::joint::PairDecision| d.partner as i64 - d.node as i64;
    NodeOffsets {
        images: OffsetHistogram::from_offsets(decisions.iter().flat_map(|d| d.image.iter().map(off))),
        texts: OffsetHistogram::from_offsets(decisions.iter().flat_map(|d| d.text.iter().map(off))),
    }
}
