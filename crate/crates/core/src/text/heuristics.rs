use std::collections::HashMap;

use regex::Regex;
use unicode_script::{Script, UnicodeScript};

/// Thresholds and word lists for the per-node heuristics.
#[derive(Clone, Debug)]
pub struct NodeFilterConfig {
    pub min_bytes_latin: usize,
    pub min_bytes_nonlatin: usize,
    /// Cleaned nodes of at most this many bytes are dropped.
    pub min_bytes_post: usize,
    pub digit_ratio_max: f64,
    pub nonalpha_ratio_max: f64,
    pub caps_ratio_max: f64,
    pub char_dominance_max: f64,
    pub angle_symbol_max: usize,
    /// Case-sensitive substrings that drop a node.
    pub banned_substrings: Vec<String>,
    /// Whole-node matches (after lowercasing and trimming) that drop a node.
    pub banned_exact: Vec<String>,
    pub date_regex: Regex,
}

pub const DEFAULT_DATE_PATTERNS: &[&str] = &[
    r"\b\d{1,4}[-/.]\d{1,2}[-/.]\d{1,4}\b",
    r"\b(?:MONTHS)\.? \d{1,2}(?:, \d{2,4})?\b",
    r"\b\d{1,2} (?:MONTHS)\.? \d{2,4}\b",
];

const MONTHS: &str = "january|february|march|april|may|june|july|august|september|october|november|december|jan|feb|mar|apr|jun|jul|aug|sep|sept|oct|nov|dec";

impl NodeFilterConfig {
    /// Compiles date patterns into one alternation; `MONTHS` in a pattern
    /// expands to English month names and abbreviations.
    pub fn compile_dates(patterns: &[&str]) -> Result<Regex, regex::Error> {
        let body = patterns
            .iter()
            .map(|p| format!("(?:{})", p.replace("MONTHS", MONTHS)))
            .collect::<Vec<_>>()
            .join("|");
        Regex::new(&format!("(?i){body}"))
    }
}

impl Default for NodeFilterConfig {
    fn default() -> Self {
        NodeFilterConfig {
            min_bytes_latin: 5,
            min_bytes_nonlatin: 15,
            min_bytes_post: 10,
            digit_ratio_max: 0.30,
            nonalpha_ratio_max: 0.33,
            caps_ratio_max: 0.20,
            char_dominance_max: 0.33,
            angle_symbol_max: 2,
            banned_substrings: ["Follow us", "javascript", "copyright", "©"]
                .map(String::from)
                .to_vec(),
            banned_exact: [
                "comment",
                "facebook",
                "instagram",
                "twitter",
                "rss",
                "newsletter",
                "share",
                "follow us",
            ]
            .map(String::from)
            .to_vec(),
            date_regex: Self::compile_dates(DEFAULT_DATE_PATTERNS).expect("date patterns"),
        }
    }
}

/// Why a node was dropped. Variants up to `CharDominance` are the
/// heuristics in evaluation order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NodeReject {
    Empty,
    TooShort,
    DigitRatio,
    Dates,
    LoremIpsum,
    NonAlphaRatio,
    CurlyBrackets,
    AngleSymbols,
    BannedSubstring,
    CapsRatio,
    BannedExact,
    CharDominance,
    TooShortAfterClean,
}

impl NodeReject {
    pub fn as_str(self) -> &'static str {
        match self {
            NodeReject::Empty => "empty",
            NodeReject::TooShort => "too_short",
            NodeReject::DigitRatio => "digit_ratio",
            NodeReject::Dates => "dates",
            NodeReject::LoremIpsum => "lorem_ipsum",
            NodeReject::NonAlphaRatio => "nonalpha_ratio",
            NodeReject::CurlyBrackets => "curly_brackets",
            NodeReject::AngleSymbols => "angle_symbols",
            NodeReject::BannedSubstring => "banned_substring",
            NodeReject::CapsRatio => "caps_ratio",
            NodeReject::BannedExact => "banned_exact",
            NodeReject::CharDominance => "char_dominance",
            NodeReject::TooShortAfterClean => "too_short_after_clean",
        }
    }
}

/// True when Latin letters are more than half of all letters.
pub fn is_latin_script(text: &str) -> bool {
    let mut letters = 0usize;
    let mut latin = 0usize;
    for c in text.chars().filter(|c| c.is_alphabetic()) {
        letters += 1;
        if c.script() == Script::Latin {
            latin += 1;
        }
    }
    letters > 0 && latin * 2 > letters
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Applies the node heuristics in order and reports the first that fires.
pub fn filter_node(text: &str, cfg: &NodeFilterConfig) -> Result<(), NodeReject> {
    if text.trim().is_empty() {
        return Err(NodeReject::Empty);
    }

    let min_bytes = if is_latin_script(text) {
        cfg.min_bytes_latin
    } else {
        cfg.min_bytes_nonlatin
    };
    if text.len() < min_bytes {
        return Err(NodeReject::TooShort);
    }

    let total = text.chars().count();
    let digits = text.chars().filter(|c| c.is_numeric()).count();
    if ratio(digits, total) > cfg.digit_ratio_max {
        return Err(NodeReject::DigitRatio);
    }

    if cfg.date_regex.find_iter(text).nth(1).is_some() {
        return Err(NodeReject::Dates);
    }

    if text.to_lowercase().contains("lorem ipsum") {
        return Err(NodeReject::LoremIpsum);
    }

    let non_ws = text.chars().filter(|c| !c.is_whitespace()).count();
    let non_alpha = text
        .chars()
        .filter(|c| !c.is_whitespace() && !c.is_alphabetic())
        .count();
    if ratio(non_alpha, non_ws) > cfg.nonalpha_ratio_max {
        return Err(NodeReject::NonAlphaRatio);
    }

    if text.contains(['{', '}']) {
        return Err(NodeReject::CurlyBrackets);
    }

    let angles = text
        .chars()
        .filter(|c| matches!(c, '≥' | '≤' | '>' | '<'))
        .count();
    if angles > cfg.angle_symbol_max {
        return Err(NodeReject::AngleSymbols);
    }

    if cfg.banned_substrings.iter().any(|s| text.contains(s.as_str())) {
        return Err(NodeReject::BannedSubstring);
    }

    let letters = text.chars().filter(|c| c.is_alphabetic()).count();
    let upper = text.chars().filter(|c| c.is_uppercase()).count();
    if ratio(upper, letters) > cfg.caps_ratio_max {
        return Err(NodeReject::CapsRatio);
    }

    let normalized = text.trim().to_lowercase();
    if cfg.banned_exact.iter().any(|s| *s == normalized) {
        return Err(NodeReject::BannedExact);
    }

    let mut counts: HashMap<char, usize> = HashMap::new();
    for c in text.chars() {
        *counts.entry(c).or_default() += 1;
    }
    let top = counts.values().copied().max().unwrap_or(0);
    if ratio(top, total) > cfg.char_dominance_max {
        return Err(NodeReject::CharDominance);
    }

    Ok(())
}
