use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use mmcorpus::corpus::{read_documents, write_documents, DocId, Document, StatsReport};
use mmcorpus::dedup::{feature_set, lsh_dedup, optimal_params, FeatureConfig, MinHasher};
use mmcorpus::fetch::ImageStore;
use mmcorpus::images::build_contamination;
use mmcorpus::joint::DocDecisions;
use mmcorpus::metrics::{metrics_report, ReportOptions};
use mmcorpus::pipeline::{self, build_scorer, exit_code, run_stage, Context, PipelineConfig, RunOptions, Stage};
use mmcorpus::{Error, Result};

#[derive(Parser)]
#[command(name = "mmcorpus", version, about = "Interleaved text-image corpus pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// WARC files -> candidate documents.
    Extract {
        #[arg(long, num_args = 1.., required = true)]
        warc: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        min_doc_bytes: Option<usize>,
        #[arg(long)]
        min_text_nodes: Option<usize>,
        #[arg(long)]
        max_image_nodes: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Assign a language to every document.
    LangId {
        #[command(flatten)]
        io: StageIo,
        #[arg(long)]
        lid_top_k: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Node- and document-level text filters.
    TextFilter {
        #[command(flatten)]
        io: StageIo,
        #[command(flatten)]
        common: Common,
    },
    /// MinHash LSH over one language; writes the ids to drop, one per line.
    Dedup {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        lang: String,
        #[arg(long, default_value_t = 0.8)]
        threshold: f64,
        #[arg(long, default_value_t = 256)]
        perms: usize,
        #[arg(long, default_value_t = FeatureConfig::default().num_features)]
        features: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Download every referenced image into the content-addressed store.
    FetchImages {
        #[command(flatten)]
        io: StageIo,
        #[arg(long)]
        ua: Option<String>,
        #[arg(long)]
        timeout_ms: Option<u64>,
        #[arg(long)]
        max_bytes: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Rule, safety and duplicate filters over fetched images.
    FilterImages {
        #[command(flatten)]
        io: StageIo,
        #[command(flatten)]
        common: Common,
    },
    /// Drop images whose pHash appears in a benchmark set.
    Decontaminate {
        #[command(flatten)]
        io: StageIo,
        #[arg(long)]
        phashes: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// pHash every image under a directory into a contamination file.
    BuildContamination {
        #[arg(long)]
        images: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Keep text/image nodes that rank in the top-k against negatives.
    JointFilter {
        #[command(flatten)]
        io: StageIo,
        #[arg(long)]
        neg: Option<usize>,
        #[arg(long)]
        top: Option<usize>,
        #[arg(long)]
        pool_cap: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        two_pass: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Write per-language gzip shards.
    Shard {
        #[command(flatten)]
        io: StageIo,
        #[command(flatten)]
        common: Common,
    },
    /// Print a stats.json as a table, CSV or JSON.
    Stats {
        stats: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
    },
    /// Diversity and distribution metrics over a shard directory.
    Metrics {
        #[arg(long)]
        shards: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// decisions.jsonl from the joint filter, for partner offsets.
        #[arg(long)]
        decisions: Option<PathBuf>,
        #[arg(long, default_value_t = 1000)]
        sample: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 50)]
        token_bin: u64,
        /// Compute Vendi scores with the configured scorer.
        #[arg(long)]
        vendi: bool,
        #[command(flatten)]
        common: Common,
    },
    Pipeline {
        #[command(subcommand)]
        command: PipelineCommand,
    },
}

#[derive(Subcommand)]
enum PipelineCommand {
    /// Run (or resume) every stage.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Stop after this stage is checkpointed.
        #[arg(long)]
        stop_after: Option<String>,
        /// key=value config override; repeatable.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        sets: Vec<String>,
    },
}

#[derive(Args)]
struct StageIo {
    /// docs.jsonl.gz from the previous stage.
    #[arg(long = "in")]
    input: PathBuf,
    /// Directory for docs.jsonl.gz, stats.json and side files.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct Common {
    /// Pipeline config file; MMCORPUS_* variables apply on top.
    #[arg(long)]
    config: Option<PathBuf>,
    /// key=value config override; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
    /// Use the built-in deterministic scorer.
    #[arg(long)]
    stub: bool,
    #[arg(long)]
    sidecar: Option<String>,
    #[arg(long)]
    img_store: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Table,
    Csv,
    Json,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}

fn parse_sets(sets: &[String]) -> Result<Vec<(String, String)>> {
    sets.iter()
        .map(|s| {
            s.split_once('=')
                .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
                .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got {s:?}")))
        })
        .collect()
}

fn env_overrides() -> Vec<(String, String)> {
    std::env::vars()
        .filter_map(|(k, v)| k.strip_prefix(pipeline::ENV_PREFIX).map(|r| (r.to_ascii_lowercase(), v)))
        .collect()
}

/// Config file (if any) + env + `--set` + subcommand flags, in that order.
fn build_config(common: &Common, flags: Vec<(&str, String)>, needs_scorer: bool) -> Result<PipelineConfig> {
    let (text, base) = match &common.config {
        Some(p) => (
            std::fs::read_to_string(p).map_err(|e| Error::Config(format!("cannot read {}: {e}", p.display())))?,
            p.parent().map(Path::to_path_buf),
        ),
        None => (String::new(), None),
    };
    let mut overrides = env_overrides();
    overrides.extend(parse_sets(&common.sets)?);
    overrides.extend(flags.into_iter().map(|(k, v)| (k.to_string(), v)));
    if common.stub {
        overrides.push(("stub_mode".into(), "true".into()));
    }
    if let Some(addr) = &common.sidecar {
        overrides.push(("sidecar_addr".into(), format!("{addr:?}")));
    }
    if let Some(dir) = &common.img_store {
        overrides.push(("img_store".into(), format!("{:?}", dir.display().to_string())));
    }
    let scorer_set = overrides.iter().any(|(k, _)| k == "stub_mode" || k == "sidecar_addr" || k == "sidecar_cmd")
        || text.contains("stub_mode")
        || text.contains("sidecar_");
    if !needs_scorer && !scorer_set {
        // stages that never call a model
        overrides.push(("stub_mode".into(), "true".into()));
    }
    PipelineConfig::from_toml_with(&text, &overrides, base.as_deref())
}

fn flag<T: ToString>(key: &'static str, v: Option<T>) -> Option<(&'static str, String)> {
    v.map(|v| (key, v.to_string()))
}

fn quoted(key: &'static str, v: Option<String>) -> Option<(&'static str, String)> {
    v.map(|v| (key, format!("{v:?}")))
}

fn run_single(stage: Stage, cfg: &PipelineConfig, input: Vec<Document>, out: &Path) -> Result<()> {
    std::fs::create_dir_all(out).map_err(|e| Error::Io { path: out.into(), source: e })?;
    let scorer = build_scorer(cfg)?;
    let ctx = Context {
        config: cfg,
        scorer,
        shard_dir: out.to_path_buf(),
    };
    let output = run_stage(stage, &ctx, input)?;
    if stage != Stage::Shard {
        write_documents(&out.join("docs.jsonl.gz"), &output.docs)?;
    }
    output.stats.write(&out.join("stats.json"))?;
    for (name, bytes) in &output.files {
        let path = out.join(name);
        std::fs::write(&path, bytes).map_err(|e| Error::Io { path, source: e })?;
    }
    log::info!("{}: {} documents out", stage.name(), output.docs.len());
    Ok(())
}

fn stage_cmd(stage: Stage, io: &StageIo, common: &Common, flags: Vec<Option<(&'static str, String)>>, needs_scorer: bool) -> Result<()> {
    let cfg = build_config(common, flags.into_iter().flatten().collect(), needs_scorer)?;
    let docs = read_documents(&io.input)?;
    run_single(stage, &cfg, docs, &io.out)
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Extract { warc, out, min_doc_bytes, min_text_nodes, max_image_nodes, common } => {
            let list = warc.iter().map(|p| format!("{:?}", p.display().to_string())).collect::<Vec<_>>().join(", ");
            let flags = [
                Some(("dumps", format!("[{list}]"))),
                flag("min_doc_bytes", min_doc_bytes),
                flag("min_text_nodes", min_text_nodes),
                flag("max_image_nodes", max_image_nodes),
            ];
            let cfg = build_config(&common, flags.into_iter().flatten().collect(), false)?;
            run_single(Stage::Extract, &cfg, Vec::new(), &out)
        }
        Command::LangId { io, lid_top_k, common } => {
            stage_cmd(Stage::LangId, &io, &common, vec![flag("lid_top_k", lid_top_k)], true)
        }
        Command::TextFilter { io, common } => stage_cmd(Stage::TextFilter, &io, &common, vec![], false),
        Command::Dedup { input, out, lang, threshold, perms, features, seed } => {
            let mut docs: Vec<Document> = read_documents(&input)?
                .into_iter()
                .filter(|d| d.lang.as_deref() == Some(lang.as_str()))
                .collect();
            docs.sort_by_key(|d| d.id);
            let hasher = MinHasher::new(perms, seed);
            let fc = FeatureConfig { num_features: features, ..FeatureConfig::default() };
            let drops = lsh_dedup(
                docs.iter().map(|d| (d.id, hasher.signature(&feature_set(&d.joined_text(), &fc)))),
                optimal_params(threshold, perms),
            );
            let body: String = drops.iter().map(|id: &DocId| format!("{id}\n")).collect();
            std::fs::write(&out, body).map_err(|e| Error::Io { path: out.clone(), source: e })?;
            log::info!("{lang}: {} of {} documents flagged", drops.len(), docs.len());
            Ok(())
        }
        Command::FetchImages { io, ua, timeout_ms, max_bytes, common } => stage_cmd(
            Stage::Fetch,
            &io,
            &common,
            vec![quoted("user_agent", ua), flag("timeout_ms", timeout_ms), flag("max_bytes", max_bytes)],
            false,
        ),
        Command::FilterImages { io, common } => stage_cmd(Stage::ImageFilter, &io, &common, vec![], true),
        Command::Decontaminate { io, phashes, common } => stage_cmd(
            Stage::Decontaminate,
            &io,
            &common,
            vec![quoted("contamination_file", Some(phashes.display().to_string()))],
            false,
        ),
        Command::BuildContamination { images, out } => {
            let (set, skipped) = build_contamination(&images)?;
            for p in &skipped {
                log::warn!("not an image: {}", p.display());
            }
            set.write(&out)?;
            log::info!("{} benchmark pHashes written", set.phashes.len());
            Ok(())
        }
        Command::JointFilter { io, neg, top, pool_cap, seed, two_pass, common } => stage_cmd(
            Stage::JointFilter,
            &io,
            &common,
            vec![
                flag("joint_negatives", neg),
                flag("joint_top", top),
                flag("joint_pool_cap", pool_cap),
                flag("seed", seed),
                two_pass.then(|| ("joint_two_pass", "true".to_string())),
            ],
            true,
        ),
        Command::Shard { io, common } => stage_cmd(Stage::Shard, &io, &common, vec![], false),
        Command::Stats { stats, format } => {
            let report = StatsReport::read(&stats)?;
            match format {
                Format::Json => println!("{}", report.to_json_pretty()),
                Format::Csv => print!("{}", report.to_csv()),
                Format::Table => {
                    println!("{:<18} {:<10} {:>10} {:>10} {:>10}  reasons", "stage", "unit", "in", "dropped", "out");
                    for (name, s) in &report.stages {
                        let reasons: Vec<String> = s.reasons.iter().map(|(r, n)| format!("{r}={n}")).collect();
                        let unit = serde_json::to_value(s.granularity)?;
                        println!(
                            "{name:<18} {:<10} {:>10} {:>10} {:>10}  {}",
                            unit.as_str().unwrap_or_default(),
                            s.items_in,
                            s.items_dropped,
                            s.items_out(),
                            reasons.join(" ")
                        );
                    }
                }
            }
            Ok(())
        }
        Command::Metrics { shards, out, decisions, sample, seed, token_bin, vendi, common } => {
            let cfg = build_config(&common, vec![], vendi)?;
            let mut docs = Vec::new();
            for path in shard_files(&shards)? {
                docs.extend(read_documents(&path)?);
            }
            docs.sort_by_key(|d| d.id);
            let decisions: Option<Vec<DocDecisions>> = match decisions {
                Some(p) => {
                    let text = std::fs::read_to_string(&p).map_err(|e| Error::Io { path: p.clone(), source: e })?;
                    Some(text.lines().map(serde_json::from_str).collect::<std::result::Result<_, _>>()?)
                }
                None => None,
            };
            let scorer = if vendi { Some(build_scorer(&cfg)?) } else { None };
            let store = ImageStore::open(cfg.img_store_dir())?;
            let opts = ReportOptions { sample, seed, token_bin, ..ReportOptions::default() };
            let report = metrics_report(
                &docs,
                decisions.as_deref(),
                scorer.as_deref(),
                |img| img.sha512.map(|h| store.blob_path(&h)).filter(|p| p.exists()),
                &opts,
            )?;
            std::fs::create_dir_all(&out).map_err(|e| Error::Io { path: out.clone(), source: e })?;
            let mut files = report.csv_files();
            files.push(("metrics.json".into(), serde_json::to_string_pretty(&report)? + "\n"));
            for (name, body) in files {
                let path = out.join(name);
                std::fs::write(&path, body).map_err(|e| Error::Io { path, source: e })?;
            }
            Ok(())
        }
        Command::Pipeline { command: PipelineCommand::Run { config, stop_after, sets } } => {
            let stop_after = match stop_after {
                Some(name) => Some(Stage::from_name(&name).ok_or_else(|| Error::Config(format!("unknown stage {name:?}")))?),
                None => None,
            };
            let text = std::fs::read_to_string(&config)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", config.display())))?;
            let mut overrides = env_overrides();
            overrides.extend(parse_sets(&sets)?);
            let cfg = PipelineConfig::from_toml_with(&text, &overrides, config.parent())?;
            let summary = pipeline::run(&cfg, &RunOptions { stop_after })?;
            for s in &summary.resumed {
                log::info!("resumed {}", s.name());
            }
            let docs: usize = summary.shards.iter().map(|m| m.document_count()).sum();
            log::info!(
                "{} — {docs} documents in {} languages",
                if summary.completed { "done" } else { "stopped" },
                summary.shards.len()
            );
            Ok(())
        }
    }
}

/// Every `*.jsonl.gz` one level below `dir`, sorted.
fn shard_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    let io = |path: &Path, e| Error::Io { path: path.to_path_buf(), source: e };
    for lang in std::fs::read_dir(dir).map_err(|e| io(dir, e))? {
        let lang = lang.map_err(|e| io(dir, e))?.path();
        if !lang.is_dir() {
            continue;
        }
        for f in std::fs::read_dir(&lang).map_err(|e| io(&lang, e))? {
            let p = f.map_err(|e| io(&lang, e))?.path();
            if p.to_string_lossy().ends_with(".jsonl.gz") {
                out.push(p);
            }
        }
    }
    out.sort();
    Ok(out)
}
