//! Vendi score, distinct n-gram ratio and per-document distributions.

use mmcorpus::corpus::{DocId, Document, Node};
use mmcorpus::metrics::{distinct_ngram_ratio, metrics_report, vendi_score, ReportOptions};
use mmcorpus::scorer::StubScorer;

fn main() -> mmcorpus::Result<()> {
    let same = vec![vec![1.0f32, 0.0, 0.0]; 8];
    let eye: Vec<Vec<f32>> = (0..8).map(|i| (0..8).map(|j| (i == j) as u8 as f32).collect()).collect();
    println!("vendi(identical) = {:.6}", vendi_score(&same)?);
    println!("vendi(orthonormal 8) = {:.6}", vendi_score(&eye)?);

    let d = distinct_ngram_ratio(["a a a", "the cat sat on the mat"], 4)?;
    println!("n-gram ratios {:?}, mean {:?}", d.ratios, d.mean);

    let docs: Vec<Document> = (0..20)
        .map(|i| {
            let mut nodes = vec![Node::text("p", format!("document {i} has {} words here", i % 5))];
            nodes.extend((0..i % 4).map(|k| Node::image(format!("http://i.test/{i}/{k}"))));
            let mut doc = Document::new(DocId(i), "u", nodes);
            doc.lang = Some(if i % 3 == 0 { "fra_Latn" } else { "eng_Latn" }.into());
            doc
        })
        .collect();
    let report = metrics_report(&docs, None, Some(&StubScorer::default()), |_| None, &ReportOptions::default())?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}
