//! Text-node heuristics, cleaning transforms and document-level text
//! filters.

mod clean;
mod document;
mod heuristics;

pub use clean::{clean_node, post_clean_gate};
pub use document::{load_wordlist, DocFilterConfig, DocReject, DEFAULT_NSFW_WORDS};
pub use document::filter_document;
pub use heuristics::{filter_node, is_latin_script, NodeFilterConfig, NodeReject};

/// Full per-node treatment: heuristics on the raw text, then cleaning, then
/// the post-clean size gate. Returns the cleaned text to keep.
pub fn process_text_node(text: &str, cfg: &NodeFilterConfig) -> Result<String, NodeReject> {
    filter_node(text, cfg)?;
    let cleaned = clean_node(text);
    if !post_clean_gate(&cleaned, cfg) {
        return Err(NodeReject::TooShortAfterClean);
    }
    Ok(cleaned)
}
