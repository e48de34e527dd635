//! Polite image download into the content-addressed store.
//!
//! With no arguments this serves the bundled mirror directory instead of
//! the network. Pass URLs to fetch them over HTTP:
//!
//! ```text
//! cargo run --example fetch_images -- https://example.org/a.png
//! ```

use std::path::PathBuf;
use std::sync::Arc;

use mmcorpus::fetch::{fetch_all_blocking, FetchOutcome, FetchPolicy, HttpTransport, ImageStore, MirrorTransport, Transport};

fn main() -> mmcorpus::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let policy = FetchPolicy { per_host_delay_ms: 200, ..FetchPolicy::default() };
    let (transport, urls): (Arc<dyn Transport>, Vec<String>) = if args.is_empty() {
        let mirror = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/golden/mirror");
        let urls = [
            "http://img-a.test/harbour/quay.png",
            "http://img-b.test/kitchen/bread.png",
            "http://img-b.test/kitchen/missing.png",
            "http://img-b.test/private/secret.png",
        ];
        (Arc::new(MirrorTransport::new(mirror)), urls.map(String::from).to_vec())
    } else {
        (Arc::new(HttpTransport::new(&policy.user_agent)?), args)
    };

    let store_dir = tempfile::tempdir()?;
    let store = ImageStore::open(store_dir.path())?;
    let (results, fetcher) = fetch_all_blocking(transport, policy, urls)?;
    store.record(&results)?;
    for r in &results {
        match &r.outcome {
            FetchOutcome::Ok(img) => println!(
                "ok    {}x{}  phash {:016x}  {}",
                img.width, img.height, img.phash, r.url
            ),
            other => println!("{:<5} {}", other.as_str(), r.url),
        }
    }
    println!("{:?}", fetcher.counters);
    Ok(())
}
