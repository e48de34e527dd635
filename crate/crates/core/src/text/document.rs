use std::path::Path;

use regex::{Regex, RegexBuilder};

use crate::corpus::Document;
use crate::error::{Error, Result};

pub const DEFAULT_NSFW_WORDS: &str = include_str!("../../data/nsfw_words.txt");

/// Parses a wordlist: one term per line, `#` starts a comment.
pub fn load_wordlist(text: &str) -> Vec<String> {
    text.lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect()
}

#[derive(Clone, Debug)]
pub struct DocFilterConfig {
    pub min_text_nodes: usize,
    pub min_chars: usize,
    /// Whole-word, case-insensitive alternation over the adult wordlist.
    pub nsfw_regex: Option<Regex>,
}

impl DocFilterConfig {
    pub fn nsfw_regex_from_words(words: &[String]) -> Result<Option<Regex>> {
        if words.is_empty() {
            return Ok(None);
        }
        let alternation = words
            .iter()
            .map(|w| regex::escape(w))
            .collect::<Vec<_>>()
            .join("|");
        RegexBuilder::new(&format!(r"\b(?:{alternation})\b"))
            .case_insensitive(true)
            .build()
            .map(Some)
            .map_err(|e| Error::Config(format!("nsfw wordlist: {e}")))
    }

    pub fn with_wordlist_file(mut self, path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        self.nsfw_regex = Self::nsfw_regex_from_words(&load_wordlist(&text))?;
        Ok(self)
    }
}

impl Default for DocFilterConfig {
    fn default() -> Self {
        DocFilterConfig {
            min_text_nodes: 5,
            min_chars: 300,
            nsfw_regex: Self::nsfw_regex_from_words(&load_wordlist(DEFAULT_NSFW_WORDS))
                .expect("default wordlist"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DocReject {
    Nsfw,
    TooFewNodes,
    TooFewChars,
}

impl DocReject {
    pub fn as_str(self) -> &'static str {
        match self {
            DocReject::Nsfw => "nsfw",
            DocReject::TooFewNodes => "too_small_nodes",
            DocReject::TooFewChars => "too_small_chars",
        }
    }
}

/// Document-level text gate, run after node filtering.
pub fn filter_document(doc: &Document, cfg: &DocFilterConfig) -> Result<(), DocReject> {
    if let Some(re) = &cfg.nsfw_regex {
        if doc.text_nodes().any(|t| re.is_match(&t.text)) {
            return Err(DocReject::Nsfw);
        }
    }
    if doc.text_node_count() < cfg.min_text_nodes {
        return Err(DocReject::TooFewNodes);
    }
    let chars: usize = doc.text_nodes().map(|t| t.text.chars().count()).sum();
    if chars < cfg.min_chars {
        return Err(DocReject::TooFewChars);
    }
    Ok(())
}
