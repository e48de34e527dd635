//! Rank each node against negatives drawn from earlier documents of the
//! same language and keep only the well-ranked pairs.

use std::path::PathBuf;

use mmcorpus::corpus::{DocId, Document, Node};
use mmcorpus::joint::{joint_filter, JointConfig};
use mmcorpus::scorer::StubScorer;

fn main() {
    let mirror = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/golden/mirror");
    let images = ["img-a.test/harbour/quay.png", "img-a.test/garden/roses.png", "img-b.test/kitchen/bread.png"];
    let docs: Vec<Document> = images
        .iter()
        .enumerate()
        .map(|(i, img)| {
            let mut d = Document::new(
                DocId(i as u128),
                format!("http://site.test/{i}"),
                vec![
                    Node::text("p", format!("Paragraph {i} describing something worth a picture, long enough to matter.")),
                    Node::image(format!("http://{img}")),
                    Node::text("p", format!("A closing remark for page {i}.")),
                ],
            );
            d.lang = Some("eng_Latn".into());
            d
        })
        .collect();

    // The stub has no semantics: rankings here are arbitrary but reproducible.
    let scorer = StubScorer::new(64);
    let report = joint_filter(
        docs,
        &scorer,
        |img| Some(mirror.join(img.url.trim_start_matches("http://"))),
        &JointConfig::default(),
    );
    for d in &report.decisions {
        for p in d.image.iter().chain(&d.text) {
            println!("doc {} node {} partner {} rank {} valid {}", d.doc, p.node, p.partner, p.best_rank, p.valid);
        }
    }
    println!("kept {} docs, dropped {:?}", report.kept.len(), report.dropped);
}
