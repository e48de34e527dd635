//! The whole pipeline on the bundled twelve-page crawl, twice: the second
//! run resumes every stage from its checkpoint.

use std::path::PathBuf;

use mmcorpus::pipeline::{run, PipelineConfig, RunOptions};

fn main() -> mmcorpus::Result<()> {
    let config = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/golden/golden.toml");
    let mut cfg = PipelineConfig::load(&config)?;
    let out = tempfile::tempdir()?;
    cfg.output_dir = out.path().to_path_buf();

    let summary = run(&cfg, &RunOptions::default())?;
    for (stage, s) in &summary.stats.stages {
        println!("{stage:<18} in {:>3}  dropped {:>3}  {:?}", s.items_in, s.items_dropped, s.reasons);
    }
    for m in &summary.shards {
        println!("{}: {} documents", m.lang, m.document_count());
    }

    let again = run(&cfg, &RunOptions::default())?;
    println!("second run resumed {} stages", again.resumed.len());
    Ok(())
}
