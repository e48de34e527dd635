use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;

use super::config::PipelineConfig;
use super::plan::{per_language_extraction_plan, LangPlan};
use crate::corpus::{Document, Granularity, ImageNode, Node, StatsReport};
use crate::dedup::{feature_set, node_dedup, optimal_params, ExactDedup, LshIndex, MinHasher};
use crate::error::{Error, Result};
use crate::fetch::{fetch_document_images, HttpTransport, ImageStore, MirrorTransport, ScoreCache, Transport};
use crate::images::{decontaminate, image_dedup, nsfw_gate, screen_rules, ContaminationSet, SafetyVerdict};
use crate::joint::joint_filter;
use crate::langid::{classify_document, LidOptions};
use crate::scorer::{ScoreMap, Scorer};
use crate::text::{filter_document, process_text_node};
use crate::warc::{extract_document, iterate_records, TagPolicy};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Stage {
    Extract,
    LangId,
    TextFilter,
    Dedup,
    Fetch,
    ImageFilter,
    Decontaminate,
    JointFilter,
    Shard,
}

impl Stage {
    pub const ALL: [Stage; 9] = [
        Stage::Extract,
        Stage::LangId,
        Stage::TextFilter,
        Stage::Dedup,
        Stage::Fetch,
        Stage::ImageFilter,
        Stage::Decontaminate,
        Stage::JointFilter,
        Stage::Shard,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Extract => "extract",
            Stage::LangId => "lang_id",
            Stage::TextFilter => "text_filter",
            Stage::Dedup => "dedup",
            Stage::Fetch => "fetch",
            Stage::ImageFilter => "image_filter",
            Stage::Decontaminate => "decontaminate",
            Stage::JointFilter => "joint_filter",
            Stage::Shard => "shard",
        }
    }

    pub fn index(self) -> usize {
        Stage::ALL.iter().position(|s| *s == self).expect("listed")
    }

    pub fn dir_name(self) -> String {
        format!("{:02}_{}", self.index() + 1, self.name())
    }

    pub fn from_name(name: &str) -> Option<Stage> {
        Stage::ALL.into_iter().find(|s| s.name() == name)
    }
}

/// What a stage hands to the checkpoint writer.
#[derive(Default)]
pub struct StageOutput {
    pub docs: Vec<Document>,
    pub stats: StatsReport,
    /// Extra artifacts written next to the documents (name, bytes).
    pub files: Vec<(String, Vec<u8>)>,
}

/// Shared services for one run.
pub struct Context<'a> {
    pub config: &'a PipelineConfig,
    pub scorer: Arc<dyn Scorer>,
    /// Where the shard stage writes its language directories.
    pub shard_dir: PathBuf,
}

impl Context<'_> {
    fn image_store(&self) -> Result<ImageStore> {
        ImageStore::open(self.config.img_store_dir())
    }
}

pub fn run_stage(stage: Stage, ctx: &Context<'_>, input: Vec<Document>) -> Result<StageOutput> {
    let mut out = match stage {
        Stage::Extract => extract(ctx),
        Stage::LangId => lang_id(ctx, input),
        Stage::TextFilter => text_filter(ctx, input),
        Stage::Dedup => dedup(ctx, input),
        Stage::Fetch => fetch(ctx, input),
        Stage::ImageFilter => image_filter(ctx, input),
        Stage::Decontaminate => decontam(ctx, input),
        Stage::JointFilter => joint(ctx, input),
        Stage::Shard => shard(ctx, input),
    }?;
    out.docs.sort_by_key(|d| d.id);
    for d in &mut out.docs {
        d.mark_stage(stage.name());
    }
    Ok(out)
}

fn warc_files(dump: &Path) -> Result<Vec<PathBuf>> {
    if dump.is_dir() {
        let mut files: Vec<PathBuf> = std::fs::read_dir(dump)
            .map_err(|e| Error::io(dump, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| {
                let name = p.file_name().and_then(|n| n.to_str()).unwrap_or("");
                name.ends_with(".warc") || name.ends_with(".warc.gz")
            })
            .collect();
        files.sort();
        Ok(files)
    } else {
        Ok(vec![dump.to_path_buf()])
    }
}

fn extract(ctx: &Context<'_>) -> Result<StageOutput> {
    let gates = ctx.config.extract_gates();
    let policy = TagPolicy::default();
    let mut stats = StatsReport::default();
    let mut docs = Vec::new();
    for (dump_idx, dump) in ctx.config.dumps.iter().enumerate() {
        for file in warc_files(dump)? {
            let mut reader = iterate_records(&file)?;
            let mut records = Vec::new();
            let mut read_error = 0;
            for r in reader.by_ref() {
                match r {
                    Ok(rec) => records.push(rec),
                    Err(e) => {
                        log::warn!("{}: stopped reading: {e}", file.display());
                        read_error = 1;
                    }
                }
            }
            let rs = reader.stats();
            let warc = stats.stage_mut("warc", Granularity::Records);
            warc.add_in(rs.yielded + rs.corrupt + rs.not_response + rs.not_html + rs.bad_status + read_error);
            warc.add_drop("corrupt", rs.corrupt);
            warc.add_drop("read_error", read_error);
            warc.add_drop("not_response", rs.not_response);
            warc.add_drop("not_html", rs.not_html);
            warc.add_drop("bad_status", rs.bad_status);

            let results: Vec<_> = records
                .par_iter()
                .map(|rec| extract_document(rec, &policy, &gates))
                .collect();
            let ex = stats.stage_mut("extract", Granularity::Documents);
            ex.add_in(results.len() as u64);
            for r in results {
                match r {
                    Ok(mut d) => {
                        d.meta.insert("dump".into(), serde_json::json!(dump_idx));
                        docs.push(d);
                    }
                    Err(reason) => ex.add_drop(reason.as_str(), 1),
                }
            }
        }
    }
    stats.stage_mut("warc", Granularity::Records);
    stats.stage_mut("extract", Granularity::Documents);
    // the same record/URL pair twice yields the same id; keep the first
    docs.sort_by_key(|d| d.id);
    let before = docs.len();
    docs.dedup_by_key(|d| d.id);
    stats
        .stage_mut("extract", Granularity::Documents)
        .add_drop("duplicate_id", (before - docs.len()) as u64);
    Ok(StageOutput {
        docs,
        stats,
        files: Vec::new(),
    })
}

fn load_counts(path: &Option<PathBuf>) -> Result<BTreeMap<String, u64>> {
    let Some(path) = path else {
        return Ok(BTreeMap::new());
    };
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn lang_id(ctx: &Context<'_>, input: Vec<Document>) -> Result<StageOutput> {
    let cfg = ctx.config;
    let counts = load_counts(&cfg.lang_counts_file)?;
    let plans: Vec<LangPlan> = per_language_extraction_plan(
        cfg.dumps.len().max(1),
        &counts,
        cfg.high_resource_k,
        cfg.low_resource_threshold,
    );
    let opts = LidOptions {
        top_k: cfg.lid_top_k,
        retry: cfg.retry(),
    };
    let allow: BTreeSet<&str> = cfg.languages_allow.iter().map(String::as_str).collect();
    let deny: BTreeSet<&str> = cfg.languages_deny.iter().map(String::as_str).collect();

    let mut stats = StatsReport::default();
    let st = stats.stage_mut("lang_id", Granularity::Documents);
    st.add_in(input.len() as u64);
    let results: Vec<_> = input
        .into_par_iter()
        .map(|d| classify_document(d, ctx.scorer.as_ref(), &opts))
        .collect();
    let mut docs = Vec::new();
    for r in results {
        match r {
            Err(reason) => st.add_drop(reason.as_str(), 1),
            Ok(d) => {
                let lang = d.lang.as_deref().unwrap_or_default();
                let dump = d.meta.get("dump").and_then(|v| v.as_u64()).unwrap_or(0) as usize;
                let plan = &plans[dump.min(plans.len() - 1)];
                if !plan.allows(lang) {
                    st.add_drop("not_planned", 1);
                } else if (!allow.is_empty() && !allow.contains(lang)) || deny.contains(lang) {
                    st.add_drop("language_filtered", 1);
                } else {
                    docs.push(d);
                }
            }
        }
    }
    Ok(StageOutput {
        docs,
        stats,
        files: Vec::new(),
    })
}

fn text_filter(ctx: &Context<'_>, input: Vec<Document>) -> Result<StageOutput> {
    let node_cfg = ctx.config.node_filter();
    let doc_cfg = ctx.config.doc_filter()?;
    let mut stats = StatsReport::default();

    let processed: Vec<(Document, u64, Vec<&'static str>)> = input
        .into_par_iter()
        .map(|mut d| {
            let mut seen = 0;
            let mut rejects = Vec::new();
            d.nodes.retain_mut(|n| {
                let Node::Text(t) = n else { return true };
                seen += 1;
                match process_text_node(&t.text, &node_cfg) {
                    Ok(clean) => {
                        t.text = clean;
                        true
                    }
                    Err(r) => {
                        rejects.push(r.as_str());
                        false
                    }
                }
            });
            (d, seen, rejects)
        })
        .collect();

    let nodes = stats.stage_mut("text_nodes", Granularity::TextNodes);
    for (_, seen, rejects) in &processed {
        nodes.add_in(*seen);
        for r in rejects {
            nodes.add_drop(r, 1);
        }
    }
    let st = stats.stage_mut("text_docs", Granularity::Documents);
    st.add_in(processed.len() as u64);
    let mut docs = Vec::new();
    for (d, _, _) in processed {
        match filter_document(&d, &doc_cfg) {
            Ok(()) => docs.push(d),
            Err(r) => st.add_drop(r.as_str(), 1),
        }
    }
    Ok(StageOutput {
        docs,
        stats,
        files: Vec::new(),
    })
}

fn dedup(ctx: &Context<'_>, mut input: Vec<Document>) -> Result<StageOutput> {
    let cfg = ctx.config;
    let conv = cfg.lev_convention()?;
    let mut stats = StatsReport::default();
    input.sort_by_key(|d| d.id);

    let text_in: u64 = input.iter().map(|d| d.text_node_count() as u64).sum();
    let results: Vec<_> = input
        .into_par_iter()
        .map(|d| node_dedup(d, cfg.lev_threshold, conv))
        .collect();
    let nodes = stats.stage_mut("node_dedup", Granularity::TextNodes);
    nodes.add_in(text_in);
    let mut docs = Vec::with_capacity(results.len());
    for (d, c) in results {
        nodes.add_drop("exact_duplicate", c.exact as u64);
        nodes.add_drop("near_duplicate", c.near as u64);
        docs.push(d);
    }

    let exact = stats.stage_mut("exact_dedup", Granularity::Documents);
    exact.add_in(docs.len() as u64);
    let mut seen = ExactDedup::new();
    let before = docs.len();
    docs.retain(|d| seen.admit(d));
    exact.add_drop("exact_duplicate", (before - docs.len()) as u64);

    let hasher = MinHasher::new(cfg.minhash_perms, cfg.seed);
    let features = cfg.feature_config();
    let params = optimal_params(cfg.minhash_threshold, cfg.minhash_perms);
    let sigs: Vec<_> = docs
        .par_iter()
        .map(|d| hasher.signature(&feature_set(&d.joined_text(), &features)))
        .collect();
    let mut indexes: BTreeMap<String, LshIndex> = BTreeMap::new();
    let mut keep = Vec::with_capacity(docs.len());
    for (d, sig) in docs.iter().zip(&sigs) {
        let idx = indexes
            .entry(d.lang.clone().unwrap_or_default())
            .or_insert_with(|| LshIndex::new(params));
        keep.push(idx.insert(d.id, sig).is_none());
    }
    let lsh = stats.stage_mut("minhash_dedup", Granularity::Documents);
    lsh.add_in(docs.len() as u64);
    let mut flags = keep.into_iter();
    docs.retain(|_| flags.next().expect("one flag per doc"));
    lsh.add_drop("near_duplicate", (sigs.len() - docs.len()) as u64);
    Ok(StageOutput {
        docs,
        stats,
        files: Vec::new(),
    })
}

pub(crate) fn transport(cfg: &PipelineConfig) -> Result<Arc<dyn Transport>> {
    Ok(match &cfg.mirror_dir {
        Some(dir) => Arc::new(MirrorTransport::new(dir)),
        None => Arc::new(HttpTransport::new(&cfg.user_agent)?),
    })
}

fn fetch(ctx: &Context<'_>, input: Vec<Document>) -> Result<StageOutput> {
    let store = ctx.image_store()?;
    let (docs, summary) = fetch_document_images(input, transport(ctx.config)?, &ctx.config.fetch_policy(), &store)?;
    let mut stats = StatsReport::default();
    let urls = stats.stage_mut("fetch_urls", Granularity::Urls);
    urls.add_in(summary.urls_in);
    for (outcome, n) in &summary.url_outcomes {
        if outcome != "ok" {
            urls.add_drop(outcome, *n);
        }
    }
    let imgs = stats.stage_mut("fetch", Granularity::Images);
    imgs.add_in(summary.images_in);
    for (reason, n) in &summary.image_drops {
        imgs.add_drop(reason, *n);
    }
    Ok(StageOutput {
        docs,
        stats,
        files: Vec::new(),
    })
}

fn image_path(store: &ImageStore) -> impl Fn(&ImageNode) -> Option<PathBuf> + Sync + '_ {
    move |img: &ImageNode| img.sha512.map(|s| store.blob_path(&s))
}

/// Safety verdict of the worst image in a document.
fn document_safety(
    doc: &Document,
    scorer: &dyn Scorer,
    cache: &ScoreCache,
    store: &ImageStore,
    ctx: &Context<'_>,
) -> Result<SafetyVerdict> {
    let thresholds = ctx.config.nsfw_thresholds();
    let retry = ctx.config.retry();
    let mut worst = SafetyVerdict::Safe;
    for img in doc.image_nodes() {
        let sha = img
            .sha512
            .ok_or_else(|| Error::Scorer(format!("image {} has no digest", img.url)))?;
        let path = store.blob_path(&sha);
        let scores = cache.get_or_compute(&sha, || {
            let mut all: ScoreMap = retry.run(|| scorer.nsfw_image(&path))?;
            all.extend(retry.run(|| scorer.csam_image(&path))?);
            Ok(all)
        })?;
        match nsfw_gate(&scores, &thresholds)? {
            SafetyVerdict::Csam => return Ok(SafetyVerdict::Csam),
            SafetyVerdict::Nsfw => worst = SafetyVerdict::Nsfw,
            SafetyVerdict::Safe => {}
        }
    }
    Ok(worst)
}

fn image_filter(ctx: &Context<'_>, input: Vec<Document>) -> Result<StageOutput> {
    let rules = ctx.config.image_rules();
    let store = ctx.image_store()?;
    let cache = ScoreCache::open(store.root().join("scores.jsonl"))?;
    let mut stats = StatsReport::default();

    let images_in: u64 = input.iter().map(|d| d.image_node_count() as u64).sum();
    let screened: Vec<_> = input.into_par_iter().map(|d| screen_rules(d, &rules)).collect();
    let st = stats.stage_mut("image_rules", Granularity::Images);
    st.add_in(images_in);
    let mut docs = Vec::with_capacity(screened.len());
    for (d, rejects) in screened {
        for r in rejects {
            st.add_drop(r.as_str(), 1);
        }
        docs.push(d);
    }

    let verdicts: Vec<Result<SafetyVerdict>> = docs
        .par_iter()
        .map(|d| document_safety(d, ctx.scorer.as_ref(), &cache, &store, ctx))
        .collect();
    let st = stats.stage_mut("image_safety", Granularity::Documents);
    st.add_in(docs.len() as u64);
    let mut safe = Vec::with_capacity(docs.len());
    for (d, v) in docs.into_iter().zip(verdicts) {
        match v? {
            SafetyVerdict::Safe => safe.push(d),
            other => st.add_drop(other.as_str(), 1),
        }
    }

    // per-language caps follow id order within each language
    let mut by_lang: BTreeMap<String, Vec<Document>> = BTreeMap::new();
    for d in safe {
        by_lang.entry(d.lang.clone().unwrap_or_default()).or_default().push(d);
    }
    let images_in: u64 = by_lang.values().flatten().map(|d| d.image_node_count() as u64).sum();
    let st = stats.stage_mut("image_dedup", Granularity::Images);
    st.add_in(images_in);
    let mut docs = Vec::new();
    for (_, mut group) in by_lang {
        group.sort_by_key(|d| d.id);
        let (kept, c) = image_dedup(group, ctx.config.image_cap);
        st.add_drop("url_in_document", c.url_in_doc);
        st.add_drop("phash_in_document", c.phash_in_doc);
        st.add_drop("language_cap", c.capped);
        docs.extend(kept);
    }
    Ok(StageOutput {
        docs,
        stats,
        files: Vec::new(),
    })
}

fn decontam(ctx: &Context<'_>, input: Vec<Document>) -> Result<StageOutput> {
    let set = match &ctx.config.contamination_file {
        Some(p) => ContaminationSet::load(p)?,
        None => ContaminationSet::default(),
    };
    let mut stats = StatsReport::default();
    let st = stats.stage_mut("decontaminate", Granularity::Images);
    st.add_in(input.iter().map(|d| d.image_node_count() as u64).sum());
    let mut docs = Vec::with_capacity(input.len());
    for d in input {
        let (d, removed) = decontaminate(d, &set);
        st.add_drop("benchmark_phash", removed);
        docs.push(d);
    }
    Ok(StageOutput {
        docs,
        stats,
        files: Vec::new(),
    })
}

fn joint(ctx: &Context<'_>, mut input: Vec<Document>) -> Result<StageOutput> {
    let store = ctx.image_store()?;
    input.sort_by_key(|d| d.id);
    let report = joint_filter(input, ctx.scorer.as_ref(), image_path(&store), &ctx.config.joint());
    let mut stats = StatsReport::default();
    let invalid_text = report.decisions.iter().flat_map(|d| &d.text).filter(|p| !p.valid).count();
    let invalid_img = report.decisions.iter().flat_map(|d| &d.image).filter(|p| !p.valid).count();
    let st = stats.stage_mut("joint_text_nodes", Granularity::TextNodes);
    st.add_in(report.text_nodes_in);
    st.add_drop("not_top_ranked", invalid_text as u64);
    let st = stats.stage_mut("joint_images", Granularity::Images);
    st.add_in(report.images_in);
    st.add_drop("not_top_ranked", invalid_img as u64);
    let st = stats.stage_mut("joint_docs", Granularity::Documents);
    st.add_in((report.kept.len() + report.dropped.len()) as u64);
    for (reason, n) in report.drop_reasons() {
        st.add_drop(reason, n);
    }
    let mut decisions = Vec::new();
    for d in &report.decisions {
        decisions.extend_from_slice(serde_json::to_string(d)?.as_bytes());
        decisions.push(b'\n');
    }
    Ok(StageOutput {
        docs: report.kept,
        stats,
        files: vec![("decisions.jsonl".into(), decisions)],
    })
}

fn shard(ctx: &Context<'_>, input: Vec<Document>) -> Result<StageOutput> {
    let mut by_lang: BTreeMap<String, Vec<Document>> = BTreeMap::new();
    for d in input {
        let lang = d
            .lang
            .clone()
            .ok_or_else(|| Error::InvalidDocument(format!("document {} has no language", d.id)))?;
        by_lang.entry(lang).or_default().push(d);
    }
    let mut stats = StatsReport::default();
    let st = stats.stage_mut("shard", Granularity::Documents);
    let mut manifests = Vec::new();
    let mut docs = Vec::new();
    for (lang, mut group) in by_lang {
        group.sort_by_key(|d| d.id);
        st.add_in(group.len() as u64);
        for d in &mut group {
            d.mark_stage(Stage::Shard.name());
        }
        manifests.push(crate::corpus::write_shard(
            group.iter().cloned(),
            &lang,
            &ctx.shard_dir,
            ctx.config.docs_per_shard,
        )?);
        docs.extend(group);
    }
    let manifest = serde_json::to_vec_pretty(&manifests)?;
    Ok(StageOutput {
        docs,
        stats,
        files: vec![("manifest.json".into(), manifest)],
    })
}
