use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;

use crate::corpus::{DocId, Document};

/// Per-document counts feeding the histograms.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct DistRecord {
    pub doc: DocId,
    pub lang: String,
    /// Unicode-whitespace tokens over all text nodes.
    pub tokens: u64,
    pub images: u64,
}

impl DistRecord {
    pub fn of(doc: &Document) -> Self {
        DistRecord {
            doc: doc.id,
            lang: doc.lang.clone().unwrap_or_default(),
            tokens: doc
                .text_nodes()
                .map(|t| t.text.split_whitespace().count() as u64)
                .sum(),
            images: doc.image_node_count() as u64,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Summary {
    pub mean: f64,
    pub median: f64,
}

/// Mean and median (average of the middle pair for even counts).
pub fn summarize(values: &[u64]) -> Option<Summary> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_unstable();
    let n = v.len();
    let median = if n % 2 == 1 {
        v[n / 2] as f64
    } else {
        (v[n / 2 - 1] + v[n / 2]) as f64 / 2.0
    };
    Some(Summary {
        mean: v.iter().sum::<u64>() as f64 / n as f64,
        median,
    })
}

/// Fixed-width histogram; keys are bin starts.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Histogram {
    pub width: u64,
    pub bins: BTreeMap<u64, u64>,
}

impl Histogram {
    pub fn new(width: u64) -> Self {
        Histogram {
            width: width.max(1),
            bins: BTreeMap::new(),
        }
    }

    pub fn bin_of(&self, v: u64) -> u64 {
        v / self.width * self.width
    }

    pub fn add(&mut self, v: u64) {
        *self.bins.entry(self.bin_of(v)).or_default() += 1;
    }

    pub fn total(&self) -> u64 {
        self.bins.values().sum()
    }

    /// `bin_start,bin_end,count` with an exclusive end.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin_start,bin_end,count\n");
        for (start, count) in &self.bins {
            let _ = writeln!(out, "{start},{},{count}", start + self.width);
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LangTally {
    pub documents: u64,
    pub tokens: u64,
    pub images: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Distributions {
    pub tokens: Histogram,
    pub images: Histogram,
    /// (token bin, image bin) → documents.
    #[serde(serialize_with = "joint_as_list")]
    pub joint: BTreeMap<(u64, u64), u64>,
    pub token_stats: Option<Summary>,
    pub image_stats: Option<Summary>,
    pub per_language: BTreeMap<String, LangTally>,
}

fn joint_as_list<S: serde::Serializer>(
    joint: &BTreeMap<(u64, u64), u64>,
    s: S,
) -> Result<S::Ok, S::Error> {
    s.collect_seq(joint.iter().map(|((t, i), c)| (t, i, c)))
}

impl Distributions {
    pub fn joint_csv(&self) -> String {
        let mut out = String::from("token_bin_start,image_bin_start,count\n");
        for ((t, i), c) in &self.joint {
            let _ = writeln!(out, "{t},{i},{c}");
        }
        out
    }
}

pub fn distributions(records: &[DistRecord], token_bin: u64, image_bin: u64) -> Distributions {
    let mut tokens = Histogram::new(token_bin);
    let mut images = Histogram::new(image_bin);
    let mut joint = BTreeMap::new();
    let mut per_language: BTreeMap<String, LangTally> = BTreeMap::new();
    for r in records {
        tokens.add(r.tokens);
        images.add(r.images);
        *joint
            .entry((tokens.bin_of(r.tokens), images.bin_of(r.images)))
            .or_default() += 1;
        let t = per_language.entry(r.lang.clone()).or_insert(LangTally {
            documents: 0,
            tokens: 0,
            images: 0,
        });
        t.documents += 1;
        t.tokens += r.tokens;
        t.images += r.images;
    }
    let tok: Vec<u64> = records.iter().map(|r| r.tokens).collect();
    let img: Vec<u64> = records.iter().map(|r| r.images).collect();
    Distributions {
        tokens,
        images,
        joint,
        token_stats: summarize(&tok),
        image_stats: summarize(&img),
        per_language,
    }
}
