use std::sync::LazyLock;

use regex::Regex;

use super::NodeFilterConfig;

static URL: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)\b(?:[a-z][a-z0-9+.\-]*://|www\.)\S+").unwrap());

const COLLAPSED: &[char] = &[
    '\t', '\n', '#', '/', '$', ')', '(', '[', ']', '!', '?', '%', '<', '>', ' ',
];

/// Deletes URLs, squeezes runs of the same special character (and of
/// spaces left behind by deleted URLs) down to one, and trims.
pub fn clean_node(text: &str) -> String {
    let without_urls = URL.replace_all(text, "");
    let mut out = String::with_capacity(without_urls.len());
    let mut prev: Option<char> = None;
    for c in without_urls.chars() {
        if prev == Some(c) && COLLAPSED.contains(&c) {
            continue;
        }
        out.push(c);
        prev = Some(c);
    }
    out.trim().to_string()
}

/// Keeps a cleaned node only if it is longer than `min_bytes_post` bytes.
pub fn post_clean_gate(text: &str, cfg: &NodeFilterConfig) -> bool {
    text.len() > cfg.min_bytes_post
}
