//! Walk a WARC file and turn each HTML response into an interleaved
//! document.
//!
//! ```text
//! cargo run --example extract_warc [path/to/file.warc.gz]
//! ```

use std::path::PathBuf;

use mmcorpus::warc::{extract_document, iterate_records, ExtractGates, TagPolicy};

fn main() -> mmcorpus::Result<()> {
    let path = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| {
        PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/golden/dump/mini.warc.gz")
    });
    let policy = TagPolicy::default();
    let gates = ExtractGates::default();

    let mut reader = iterate_records(&path)?;
    for record in reader.by_ref() {
        let record = record?;
        match extract_document(&record, &policy, &gates) {
            Ok(doc) => println!(
                "{}  {:>2} text  {:>2} images  {}",
                doc.id,
                doc.text_node_count(),
                doc.image_node_count(),
                doc.source_url
            ),
            Err(why) => println!("{:<32}  dropped: {}", "-", why.as_str()),
        }
    }
    println!("\n{:?}", reader.stats());
    Ok(())
}
