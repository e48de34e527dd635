//! Node-level cleaning and heuristics, then the document-level gate.

use mmcorpus::corpus::{DocId, Document, Node};
use mmcorpus::text::{filter_document, process_text_node, DocFilterConfig, NodeFilterConfig};

const NODES: &[&str] = &[
    "The harbour was quiet this morning; only two fishing boats went out before dawn.",
    "Share",
    "1234 5678 9012 3456 7890",
    "CLICK HERE TO SUBSCRIBE TO OUR NEWSLETTER NOW",
    "Visit https://example.test/promo for more — the nets are mended on the quay every afternoon.",
    "Gulls follow the boats back in, hoping for scraps from the day's catch.",
    "By evening the quay smells of salt, diesel and fresh paint.",
    "Tourists rarely stay past sunset, when the wind picks up from the west.",
];

fn main() {
    let cfg = NodeFilterConfig::default();
    let mut kept = Vec::new();
    for text in NODES {
        match process_text_node(text, &cfg) {
            Ok(clean) => {
                println!("keep  {clean}");
                kept.push(Node::text("p", clean));
            }
            Err(why) => println!("drop  [{}] {text}", why.as_str()),
        }
    }

    let doc = Document::new(DocId(1), "http://example.test/harbour", kept);
    match filter_document(&doc, &DocFilterConfig::default()) {
        Ok(()) => println!("\ndocument passes ({} nodes)", doc.text_node_count()),
        Err(why) => println!("\ndocument dropped: {}", why.as_str()),
    }
}
