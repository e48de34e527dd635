//! Image rule filters, perceptual hashing, safety gating, deduplication
//! caps and benchmark decontamination.

mod decontam;
mod dedup;
mod phash;
mod rules;
mod safety;

pub use decontam::{build_contamination, decontaminate, ContaminationSet};
pub use dedup::{dedup_within_document, image_dedup, ImageDedupCounts, LanguageCaps};
pub use phash::{hamming, phash_bytes, phash_image, phash_path};
pub use rules::{geometry_filter, screen_rules, url_rule_filter, ImageReject, ImageRuleConfig};
pub use safety::{nsfw_gate, NsfwThresholds, SafetyVerdict};
