use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dedup::{FeatureConfig, LevConvention};
use crate::error::{Error, Result};
use crate::fetch::FetchPolicy;
use crate::images::{ImageRuleConfig, NsfwThresholds};
use crate::joint::JointConfig;
use crate::scorer::RetryPolicy;
use crate::text::{DocFilterConfig, NodeFilterConfig};
use crate::warc::ExtractGates;

/// Prefix of environment variables overriding config keys:
/// `MMCORPUS_SEED=9` sets `seed`.
pub const ENV_PREFIX: &str = "MMCORPUS_";

/// Every knob of a run, flat. Defaults are the published thresholds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// One entry per crawl dump, oldest first: a WARC file or a directory
    /// of `*.warc` / `*.warc.gz` files.
    pub dumps: Vec<PathBuf>,
    pub output_dir: PathBuf,
    pub seed: u64,
    /// Worker threads; 0 uses one per core.
    pub threads: usize,

    pub stub_mode: bool,
    pub stub_dim: usize,
    /// Restricts the stub's language table; empty keeps the full table.
    pub stub_languages: Vec<String>,
    /// `host:port` of a running sidecar.
    pub sidecar_addr: Option<String>,
    /// Command line to spawn a sidecar speaking over stdio.
    pub sidecar_cmd: Vec<String>,
    pub scorer_retries: u32,

    pub languages_allow: Vec<String>,
    pub languages_deny: Vec<String>,
    /// JSON object of language → document count from earlier dumps.
    pub lang_counts_file: Option<PathBuf>,
    pub high_resource_k: usize,
    pub low_resource_threshold: u64,

    pub min_doc_bytes: usize,
    pub min_text_nodes: usize,
    pub max_image_nodes: usize,

    pub lid_top_k: usize,

    pub node_min_bytes_latin: usize,
    pub node_min_bytes_nonlatin: usize,
    pub node_min_bytes_post: usize,
    pub digit_ratio_max: f64,
    pub nonalpha_ratio_max: f64,
    pub caps_ratio_max: f64,
    pub char_dominance_max: f64,
    pub angle_symbol_max: usize,
    pub doc_min_text_nodes: usize,
    pub doc_min_chars: usize,
    /// Replaces the built-in adult wordlist.
    pub nsfw_wordlist: Option<PathBuf>,

    pub lev_threshold: f64,
    /// `max_len` or `indel`.
    pub lev_convention: String,
    pub minhash_threshold: f64,
    pub minhash_perms: usize,
    pub minhash_features: u32,

    pub img_store: Option<PathBuf>,
    /// Serve image URLs from `<dir>/<host>/<path>` instead of the network.
    pub mirror_dir: Option<PathBuf>,
    pub user_agent: String,
    pub per_host_concurrency: usize,
    pub per_host_delay_ms: u64,
    pub timeout_ms: u64,
    pub max_bytes: usize,
    pub respect_robots: bool,
    pub fetch_retries: u32,

    pub min_side: u32,
    pub aspect_min: f64,
    pub aspect_max: f64,
    pub url_banned_substrings: Vec<String>,
    pub name_banned_exact: Vec<String>,
    pub porn_hentai_sum: f64,
    pub nudenet_exposed: f64,
    pub safer_porn: f64,
    pub csam: f64,
    pub image_cap: usize,

    /// One hex16 pHash per line.
    pub contamination_file: Option<PathBuf>,

    pub joint_negatives: usize,
    pub joint_top: usize,
    pub joint_pool_cap: usize,
    pub joint_two_pass: bool,
    pub joint_length_tolerance: f64,
    pub final_min_bytes: usize,

    pub docs_per_shard: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let node = NodeFilterConfig::default();
        let doc = DocFilterConfig::default();
        let gates = ExtractGates::default();
        let rules = ImageRuleConfig::default();
        let nsfw = NsfwThresholds::default();
        let fetch = FetchPolicy::default();
        let joint = JointConfig::default();
        PipelineConfig {
            dumps: Vec::new(),
            output_dir: PathBuf::from("out"),
            seed: 0,
            threads: 0,
            stub_mode: false,
            stub_dim: 64,
            stub_languages: Vec::new(),
            sidecar_addr: None,
            sidecar_cmd: Vec::new(),
            scorer_retries: 3,
            languages_allow: Vec::new(),
            languages_deny: Vec::new(),
            lang_counts_file: None,
            high_resource_k: 6,
            low_resource_threshold: 1_000_000,
            min_doc_bytes: gates.min_doc_bytes,
            min_text_nodes: gates.min_text_nodes,
            max_image_nodes: gates.max_image_nodes,
            lid_top_k: 3,
            node_min_bytes_latin: node.min_bytes_latin,
            node_min_bytes_nonlatin: node.min_bytes_nonlatin,
            node_min_bytes_post: node.min_bytes_post,
            digit_ratio_max: node.digit_ratio_max,
            nonalpha_ratio_max: node.nonalpha_ratio_max,
            caps_ratio_max: node.caps_ratio_max,
            char_dominance_max: node.char_dominance_max,
            angle_symbol_max: node.angle_symbol_max,
            doc_min_text_nodes: doc.min_text_nodes,
            doc_min_chars: doc.min_chars,
            nsfw_wordlist: None,
            lev_threshold: 0.95,
            lev_convention: "max_len".into(),
            minhash_threshold: 0.8,
            minhash_perms: 256,
            minhash_features: FeatureConfig::default().num_features,
            img_store: None,
            mirror_dir: None,
            user_agent: fetch.user_agent,
            per_host_concurrency: fetch.per_host_concurrency,
            per_host_delay_ms: fetch.per_host_delay_ms,
            timeout_ms: fetch.timeout_ms,
            max_bytes: fetch.max_bytes,
            respect_robots: fetch.respect_robots,
            fetch_retries: fetch.retries,
            min_side: rules.min_side,
            aspect_min: rules.aspect_min,
            aspect_max: rules.aspect_max,
            url_banned_substrings: rules.url_banned_substrings,
            name_banned_exact: rules.name_banned_exact,
            porn_hentai_sum: nsfw.porn_hentai_sum,
            nudenet_exposed: nsfw.nudenet_exposed,
            safer_porn: nsfw.safer_porn,
            csam: nsfw.csam,
            image_cap: 10,
            contamination_file: None,
            joint_negatives: joint.negatives,
            joint_top: joint.top,
            joint_pool_cap: joint.pool_cap,
            joint_two_pass: joint.two_pass,
            joint_length_tolerance: joint.length_tolerance,
            final_min_bytes: joint.min_doc_bytes,
            docs_per_shard: crate::corpus::DEFAULT_DOCS_PER_SHARD,
        }
    }
}

fn env_value(raw: &str) -> toml::Value {
    // Anything TOML can parse as a value keeps its type; the rest is a string.
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

impl PipelineConfig {
    /// Parses TOML text, applies `overrides` (key, raw value) on top, and
    /// validates. Relative paths are resolved against `base_dir`.
    pub fn from_toml_with(text: &str, overrides: &[(String, String)], base_dir: Option<&Path>) -> Result<Self> {
        let mut table: toml::Table =
            toml::from_str(text).map_err(|e| Error::Config(format!("config: {e}")))?;
        for (k, v) in overrides {
            table.insert(k.clone(), env_value(v));
        }
        let mut cfg: PipelineConfig = table
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(format!("config: {e}")))?;
        if let Some(base) = base_dir {
            cfg.resolve_paths(base);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file and applies `MMCORPUS_*` environment overrides.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let overrides: Vec<(String, String)> = std::env::vars()
            .filter_map(|(k, v)| {
                k.strip_prefix(ENV_PREFIX)
                    .map(|rest| (rest.to_ascii_lowercase(), v))
            })
            .collect();
        Self::from_toml_with(&text, &overrides, path.parent())
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        self.dumps.iter_mut().for_each(fix);
        fix(&mut self.output_dir);
        for p in [
            &mut self.lang_counts_file,
            &mut self.nsfw_wordlist,
            &mut self.img_store,
            &mut self.mirror_dir,
            &mut self.contamination_file,
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !self.stub_mode && self.sidecar_addr.is_none() && self.sidecar_cmd.is_empty() {
            return bad("a scorer is required: set stub_mode, sidecar_addr or sidecar_cmd".into());
        }
        if self.stub_dim < 2 {
            return bad("stub_dim must be at least 2".into());
        }
        for (name, v) in [
            ("porn_hentai_sum", self.porn_hentai_sum),
            ("nudenet_exposed", self.nudenet_exposed),
            ("safer_porn", self.safer_porn),
            ("csam", self.csam),
        ] {
            if !(v > 0.0 && v < 1.0) {
                return bad(format!("{name} must be in (0, 1), got {v}"));
            }
        }
        if !(0.0..=1.0).contains(&self.lev_threshold) || !(0.0..=1.0).contains(&self.minhash_threshold) {
            return bad("similarity thresholds must be in [0, 1]".into());
        }
        if self.minhash_perms == 0 || self.minhash_features == 0 {
            return bad("minhash_perms and minhash_features must be positive".into());
        }
        self.lev_convention()?;
        if self.max_bytes == 0 || self.per_host_concurrency == 0 {
            return bad("max_bytes and per_host_concurrency must be positive".into());
        }
        if !(self.aspect_min > 0.0 && self.aspect_min <= self.aspect_max) {
            return bad("aspect bounds must satisfy 0 < aspect_min <= aspect_max".into());
        }
        if self.joint_top == 0 || self.docs_per_shard == 0 {
            return bad("joint_top and docs_per_shard must be positive".into());
        }
        Ok(())
    }

    pub fn lev_convention(&self) -> Result<LevConvention> {
        match self.lev_convention.as_str() {
            "max_len" => Ok(LevConvention::MaxLen),
            "indel" => Ok(LevConvention::Indel),
            other => Err(Error::Config(format!(
                "lev_convention must be max_len or indel, got {other:?}"
            ))),
        }
    }

    pub fn img_store_dir(&self) -> PathBuf {
        self.img_store
            .clone()
            .unwrap_or_else(|| self.output_dir.join("images"))
    }

    pub fn extract_gates(&self) -> ExtractGates {
        ExtractGates {
            min_doc_bytes: self.min_doc_bytes,
            min_text_nodes: self.min_text_nodes,
            max_image_nodes: self.max_image_nodes,
        }
    }

    pub fn node_filter(&self) -> NodeFilterConfig {
        NodeFilterConfig {
            min_bytes_latin: self.node_min_bytes_latin,
            min_bytes_nonlatin: self.node_min_bytes_nonlatin,
            min_bytes_post: self.node_min_bytes_post,
            digit_ratio_max: self.digit_ratio_max,
            nonalpha_ratio_max: self.nonalpha_ratio_max,
            caps_ratio_max: self.caps_ratio_max,
            char_dominance_max: self.char_dominance_max,
            angle_symbol_max: self.angle_symbol_max,
            ..NodeFilterConfig::default()
        }
    }

    pub fn doc_filter(&self) -> Result<DocFilterConfig> {
        let cfg = DocFilterConfig {
            min_text_nodes: self.doc_min_text_nodes,
            min_chars: self.doc_min_chars,
            ..DocFilterConfig::default()
        };
        match &self.nsfw_wordlist {
            Some(p) => cfg.with_wordlist_file(p),
            None => Ok(cfg),
        }
    }

    pub fn feature_config(&self) -> FeatureConfig {
        FeatureConfig {
            num_features: self.minhash_features,
            ..FeatureConfig::default()
        }
    }

    pub fn fetch_policy(&self) -> FetchPolicy {
        FetchPolicy {
            user_agent: self.user_agent.clone(),
            per_host_concurrency: self.per_host_concurrency,
            per_host_delay_ms: self.per_host_delay_ms,
            timeout_ms: self.timeout_ms,
            max_bytes: self.max_bytes,
            respect_robots: self.respect_robots,
            retries: self.fetch_retries,
            ..FetchPolicy::default()
        }
    }

    pub fn image_rules(&self) -> ImageRuleConfig {
        ImageRuleConfig {
            min_side: self.min_side,
            aspect_min: self.aspect_min,
            aspect_max: self.aspect_max,
            url_banned_substrings: self.url_banned_substrings.clone(),
            name_banned_exact: self.name_banned_exact.clone(),
        }
    }

    pub fn nsfw_thresholds(&self) -> NsfwThresholds {
        NsfwThresholds {
            porn_hentai_sum: self.porn_hentai_sum,
            nudenet_exposed: self.nudenet_exposed,
            safer_porn: self.safer_porn,
            csam: self.csam,
        }
    }

    pub fn retry(&self) -> RetryPolicy {
        RetryPolicy {
            attempts: self.scorer_retries.max(1),
            ..RetryPolicy::default()
        }
    }

    pub fn joint(&self) -> JointConfig {
        JointConfig {
            negatives: self.joint_negatives,
            top: self.joint_top,
            pool_cap: self.joint_pool_cap,
            seed: self.seed,
            two_pass: self.joint_two_pass,
            length_tolerance: self.joint_length_tolerance,
            min_doc_bytes: self.final_min_bytes,
            retry: self.retry(),
        }
    }

    /// Canonical JSON of the config, used in the run manifest and in
    /// stage markers.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }
}
