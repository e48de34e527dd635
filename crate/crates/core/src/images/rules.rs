use url::Url;

use crate::corpus::{Document, Node};

#[derive(Clone, Debug, PartialEq)]
pub struct ImageRuleConfig {
    pub min_side: u32,
    pub aspect_min: f64,
    pub aspect_max: f64,
    pub url_banned_substrings: Vec<String>,
    pub name_banned_exact: Vec<String>,
}

impl Default for ImageRuleConfig {
    fn default() -> Self {
        ImageRuleConfig {
            min_side: 150,
            aspect_min: 1.0 / 3.0,
            aspect_max: 3.0,
            url_banned_substrings: ["logo", "banner", "button", "widget", "icon", "plugin"]
                .map(String::from)
                .to_vec(),
            name_banned_exact: ["twitter", "facebook", "rss"].map(String::from).to_vec(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ImageReject {
    Malformed,
    BannedSubstring(String),
    BannedName(String),
    TooSmall,
    Aspect,
    /// No dimensions: the image was never fetched successfully.
    NotFetched,
}

impl ImageReject {
    pub fn as_str(&self) -> &'static str {
        match self {
            ImageReject::Malformed => "malformed_url",
            ImageReject::BannedSubstring(_) => "banned_substring",
            ImageReject::BannedName(_) => "banned_name",
            ImageReject::TooSmall => "too_small",
            ImageReject::Aspect => "aspect",
            ImageReject::NotFetched => "not_fetched",
        }
    }
}

pub fn url_rule_filter(url: &str, cfg: &ImageRuleConfig) -> Result<(), ImageReject> {
    let parsed = Url::parse(url).map_err(|_| ImageReject::Malformed)?;
    let lower = url.to_lowercase();
    if let Some(word) = cfg
        .url_banned_substrings
        .iter()
        .find(|w| lower.contains(&w.to_lowercase()))
    {
        return Err(ImageReject::BannedSubstring(word.clone()));
    }
    let last = parsed
        .path_segments()
        .and_then(|mut s| s.next_back())
        .unwrap_or("");
    let stem = match last.rfind('.') {
        Some(i) if i > 0 => &last[..i],
        _ => last,
    };
    if let Some(name) = cfg
        .name_banned_exact
        .iter()
        .find(|n| n.to_lowercase() == stem.to_lowercase())
    {
        return Err(ImageReject::BannedName(name.clone()));
    }
    Ok(())
}

/// Both bounds of the aspect interval are inclusive.
pub fn geometry_filter(width: u32, height: u32, cfg: &ImageRuleConfig) -> Result<(), ImageReject> {
    if width.min(height) < cfg.min_side {
        return Err(ImageReject::TooSmall);
    }
    // The lower bound is checked as an upper bound on h/w so that the
    // default 1/3 (inexact in binary) still admits exactly 150x450.
    let (w, h) = (width as f64, height as f64);
    if w / h > cfg.aspect_max || h / w > 1.0 / cfg.aspect_min {
        return Err(ImageReject::Aspect);
    }
    Ok(())
}

/// Applies URL and geometry rules to every image node, removing failures.
/// Returns the surviving document and the rejects in node order.
pub fn screen_rules(mut doc: Document, cfg: &ImageRuleConfig) -> (Document, Vec<ImageReject>) {
    let mut rejects = Vec::new();
    doc.nodes.retain(|n| {
        let Node::Image(img) = n else { return true };
        let verdict = url_rule_filter(&img.url, cfg).and_then(|_| match (img.width, img.height) {
            (Some(w), Some(h)) => geometry_filter(w, h, cfg),
            _ => Err(ImageReject::NotFetched),
        });
        match verdict {
            Ok(()) => true,
            Err(r) => {
                rejects.push(r);
                false
            }
        }
    });
    (doc, rejects)
}
