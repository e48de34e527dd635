//! Build a benchmark pHash set from a directory of images and strip
//! matching images from documents.
//!
//! ```text
//! cargo run --example decontaminate [benchmark-image-dir]
//! ```

use std::path::PathBuf;

use mmcorpus::corpus::{DocId, Document, ImageNode, Node};
use mmcorpus::images::{build_contamination, decontaminate, phash_path};

fn main() -> mmcorpus::Result<()> {
    let mirror = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/golden/mirror");
    let scratch = tempfile::tempdir()?;
    let dir = match std::env::args().nth(1) {
        Some(d) => PathBuf::from(d),
        None => {
            std::fs::copy(mirror.join("img-b.test/kitchen/pan.png"), scratch.path().join("pan.png"))?;
            scratch.path().to_path_buf()
        }
    };
    let (set, skipped) = build_contamination(&dir)?;
    println!("{} benchmark hashes ({} files skipped)", set.phashes.len(), skipped.len());

    let mut nodes = vec![Node::text("p", "A kitchen with a few pans.")];
    for name in ["img-b.test/kitchen/pan.png", "img-a.test/harbour/quay.png"] {
        let mut img = ImageNode::new(format!("http://{name}"));
        img.phash = Some(phash_path(&mirror.join(name))?);
        nodes.push(Node::Image(img));
    }
    let (doc, removed) = decontaminate(Document::new(DocId(1), "u", nodes), &set);
    println!("removed {removed}; left: {:?}", doc.image_nodes().map(|i| &i.url).collect::<Vec<_>>());
    Ok(())
}
