//! End-to-end driver: runs the stage chain over WARC dumps with a
//! checkpoint after every stage, so an interrupted run resumes where it
//! stopped.

mod config;
mod plan;
mod stages;

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use config::{PipelineConfig, ENV_PREFIX};
pub use plan::{per_language_extraction_plan, LangPlan};
pub use stages::{run_stage, Context, Stage, StageOutput};

use crate::corpus::{read_documents, write_documents, Document, ShardManifest, StatsReport};
use crate::error::{Error, Result};
use crate::scorer::{Scorer, SidecarClient, StubScorer};

const DONE: &str = "_DONE";
const DOCS: &str = "docs.jsonl.gz";
const STATS: &str = "stats.json";

/// Checkpoint marker left in a finished stage directory.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageMarker {
    pub stage: String,
    /// Marker id of the stage this one consumed ("" for the first).
    pub input: String,
    pub config: String,
    pub output: String,
}

impl StageMarker {
    pub fn id(&self) -> String {
        let json = serde_json::to_string(self).expect("marker serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    /// Stop once this stage is checkpointed, as if the process died there.
    pub stop_after: Option<Stage>,
}

#[derive(Debug, Default)]
pub struct RunSummary {
    pub stats: StatsReport,
    /// Stages skipped because a matching checkpoint was found.
    pub resumed: Vec<Stage>,
    pub shards: Vec<ShardManifest>,
    pub completed: bool,
}

pub fn stage_dir(output_dir: &Path, stage: Stage) -> PathBuf {
    output_dir.join("stages").join(stage.dir_name())
}

pub fn shard_dir(output_dir: &Path) -> PathBuf {
    output_dir.join("shards")
}

pub fn build_scorer(cfg: &PipelineConfig) -> Result<Arc<dyn Scorer>> {
    if cfg.stub_mode {
        let mut s = StubScorer::new(cfg.stub_dim);
        if !cfg.stub_languages.is_empty() {
            s = s.with_languages(cfg.stub_languages.clone());
        }
        return Ok(Arc::new(s));
    }
    if let Some(addr) = &cfg.sidecar_addr {
        return Ok(Arc::new(SidecarClient::connect(addr.as_str())?));
    }
    if let Some((program, args)) = cfg.sidecar_cmd.split_first() {
        return Ok(Arc::new(SidecarClient::spawn(program, args)?));
    }
    Err(Error::Config(
        "no scorer: set stub_mode, sidecar_addr or sidecar_cmd".into(),
    ))
}

fn file_digest(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn read_marker(dir: &Path) -> Option<StageMarker> {
    let text = fs::read_to_string(dir.join(DONE)).ok()?;
    serde_json::from_str(&text).ok()
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn stage_error(stage: Stage, e: Error) -> Error {
    match e {
        e @ (Error::Config(_) | Error::Stage { .. }) => e,
        other => Error::Stage {
            stage: stage.name().into(),
            message: other.to_string(),
        },
    }
}

/// Runs (or resumes) the whole chain described by `cfg`.
pub fn run(cfg: &PipelineConfig, opts: &RunOptions) -> Result<RunSummary> {
    cfg.validate()?;
    let scorer = build_scorer(cfg)?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if cfg.threads > 0 {
        builder = builder.num_threads(cfg.threads);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| run_with(cfg, scorer, opts))
}

pub fn run_with(cfg: &PipelineConfig, scorer: Arc<dyn Scorer>, opts: &RunOptions) -> Result<RunSummary> {
    let out = &cfg.output_dir;
    fs::create_dir_all(out.join("stages")).map_err(|e| Error::io(out, e))?;
    let config_hash = hex::encode(Sha256::digest(cfg.canonical_json().as_bytes()));
    let ctx = Context {
        config: cfg,
        scorer,
        shard_dir: out.join(".shards.tmp"),
    };

    let mut summary = RunSummary::default();
    let mut input_id = String::new();
    let mut docs: Vec<Document> = Vec::new();
    let mut loaded = true;
    for stage in Stage::ALL {
        let dir = stage_dir(out, stage);
        let docs_path = dir.join(DOCS);
        let reusable = read_marker(&dir).filter(|m| {
            m.stage == stage.name()
                && m.input == input_id
                && m.config == config_hash
                && file_digest(&docs_path).ok().as_deref() == Some(m.output.as_str())
                && (stage != Stage::Shard || shard_dir(out).is_dir())
        });

        if let Some(marker) = reusable {
            log::info!("{}: checkpoint found, skipping", stage.name());
            summary.stats.merge(&StatsReport::read(&dir.join(STATS))?);
            summary.resumed.push(stage);
            input_id = marker.id();
            // documents are only read back when a later stage needs them
            loaded = false;
        } else {
            if !loaded {
                let prev = Stage::ALL[stage.index() - 1];
                docs = read_documents(&stage_dir(out, prev).join(DOCS))?;
            }
            let marker = execute(stage, &ctx, std::mem::take(&mut docs), &dir, &input_id, &config_hash)
                .map_err(|e| stage_error(stage, e))?;
            docs = read_documents(&docs_path)?;
            loaded = true;
            summary.stats.merge(&StatsReport::read(&dir.join(STATS))?);
            input_id = marker.id();
        }
        if opts.stop_after == Some(stage) {
            return Ok(summary);
        }
    }

    let manifest_path = stage_dir(out, Stage::Shard).join("manifest.json");
    let text = fs::read_to_string(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
    summary.shards = serde_json::from_str(&text)?;
    summary.stats.write(&out.join("stats.json"))?;
    let manifest = serde_json::json!({
        "version": env!("CARGO_PKG_VERSION"),
        "config": serde_json::from_str::<serde_json::Value>(&cfg.canonical_json())?,
        "config_sha256": config_hash,
        "final_marker": input_id,
        "shards": summary.shards,
    });
    write_file(
        &out.join("run_manifest.json"),
        serde_json::to_string_pretty(&manifest)?.as_bytes(),
    )?;
    summary.completed = true;
    Ok(summary)
}

/// Runs one stage into a scratch directory and swaps it into place once
/// every artifact is on disk, so a failure never leaves a half-written
/// checkpoint behind.
fn execute(
    stage: Stage,
    ctx: &Context<'_>,
    input: Vec<Document>,
    dir: &Path,
    input_id: &str,
    config_hash: &str,
) -> Result<StageMarker> {
    let parent = dir.parent().expect("stage dir has a parent");
    let tmp = parent.join(format!(".{}.tmp", stage.dir_name()));
    if tmp.exists() {
        fs::remove_dir_all(&tmp).map_err(|e| Error::io(&tmp, e))?;
    }
    if stage == Stage::Shard && ctx.shard_dir.exists() {
        fs::remove_dir_all(&ctx.shard_dir).map_err(|e| Error::io(&ctx.shard_dir, e))?;
    }
    log::info!("{}: {} documents in", stage.name(), input.len());
    let output = run_stage(stage, ctx, input)?;
    fs::create_dir_all(&tmp).map_err(|e| Error::io(&tmp, e))?;
    write_documents(&tmp.join(DOCS), &output.docs)?;
    output.stats.write(&tmp.join(STATS))?;
    for (name, bytes) in &output.files {
        write_file(&tmp.join(name), bytes)?;
    }
    let marker = StageMarker {
        stage: stage.name().into(),
        input: input_id.into(),
        config: config_hash.into(),
        output: file_digest(&tmp.join(DOCS))?,
    };
    write_file(&tmp.join(DONE), serde_json::to_string_pretty(&marker)?.as_bytes())?;

    if stage == Stage::Shard {
        let final_dir = shard_dir(&ctx.config.output_dir);
        if final_dir.exists() {
            fs::remove_dir_all(&final_dir).map_err(|e| Error::io(&final_dir, e))?;
        }
        if ctx.shard_dir.exists() {
            fs::rename(&ctx.shard_dir, &final_dir).map_err(|e| Error::io(&final_dir, e))?;
        } else {
            fs::create_dir_all(&final_dir).map_err(|e| Error::io(&final_dir, e))?;
        }
    }
    if dir.exists() {
        fs::remove_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::rename(&tmp, dir).map_err(|e| Error::io(dir, e))?;
    log::info!("{}: {} documents out", stage.name(), output.docs.len());
    Ok(marker)
}

/// Exit code for a failed run: 2 for configuration problems, 3 otherwise.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) => 2,
        _ => 3,
    }
}
