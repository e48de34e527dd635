use std::path::Path;
use std::sync::LazyLock;

use sha2::{Digest, Sha256};

use super::{ScoreMap, Scorer};
use crate::error::{Error, Result};

/// Labels of the stub language identifier, in table order.
pub static LANGUAGE_TABLE: LazyLock<Vec<String>> = LazyLock::new(|| {
    include_str!("../../data/lid_languages.txt")
        .lines()
        .filter(|l| !l.trim_start().starts_with('#'))
        .flat_map(str::split_whitespace)
        .map(str::to_string)
        .collect()
});

fn first_u64(digest: &[u8]) -> u64 {
    u64::from_be_bytes(digest[..8].try_into().unwrap())
}

/// Deterministic pseudo-embedding: component `i` comes from
/// `SHA-256(input || le32(i))`, mapped to `[-1, 1)`, then the vector is
/// L2-normalized and rounded to single precision.
pub fn stub_embed(input: &[u8], dim: usize) -> Vec<f32> {
    assert!(dim >= 2, "stub embedding dimension must be at least 2");
    let mut v: Vec<f64> = (0..dim as u32)
        .map(|i| {
            let mut h = Sha256::new();
            h.update(input);
            h.update(i.to_le_bytes());
            let u = first_u64(&h.finalize());
            u as f64 / 2f64.powi(63) - 1.0
        })
        .collect();
    let mut norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        v[0] = 1.0;
        norm = 1.0;
    }
    v.iter().map(|x| (x / norm) as f32).collect()
}

/// Deterministic pseudo language id over `table`: the hashed language gets
/// 0.8, the next table entry 0.15 and the previous one 0.05.
pub fn stub_lid(text: &str, table: &[String]) -> Result<Vec<(String, f64)>> {
    if text.is_empty() {
        return Err(Error::Scorer("empty".into()));
    }
    if table.is_empty() {
        return Err(Error::Scorer("empty language table".into()));
    }
    let n = table.len();
    let idx = (first_u64(&Sha256::digest(text.as_bytes())) % n as u64) as usize;
    Ok(vec![
        (table[idx].clone(), 0.8),
        (table[(idx + 1) % n].clone(), 0.15),
        (table[(idx + n - 1) % n].clone(), 0.05),
    ])
}

/// Built-in stand-in for the model sidecar. Image safety scores are all
/// zero, so every image is judged safe.
#[derive(Clone, Debug)]
pub struct StubScorer {
    pub dim: usize,
    pub languages: Vec<String>,
}

impl Default for StubScorer {
    fn default() -> Self {
        StubScorer {
            dim: 64,
            languages: LANGUAGE_TABLE.clone(),
        }
    }
}

impl StubScorer {
    pub fn new(dim: usize) -> Self {
        StubScorer {
            dim,
            ..Default::default()
        }
    }

    pub fn with_languages(mut self, languages: Vec<String>) -> Self {
        self.languages = languages;
        self
    }
}

impl Scorer for StubScorer {
    fn lid(&self, text: &str) -> Result<Vec<(String, f64)>> {
        stub_lid(text, &self.languages)
    }

    fn embed_text(&self, text: &str) -> Result<Vec<f32>> {
        Ok(stub_embed(text.as_bytes(), self.dim))
    }

    fn embed_image(&self, path: &Path) -> Result<Vec<f32>> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Ok(stub_embed(&bytes, self.dim))
    }

    fn nsfw_image(&self, _path: &Path) -> Result<ScoreMap> {
        Ok(["porn", "hentai", "nudenet_exposed_max", "safer_porn"]
            .into_iter()
            .map(|k| (k.to_string(), 0.0))
            .collect())
    }

    fn csam_image(&self, _path: &Path) -> Result<ScoreMap> {
        Ok([("safer_csam".to_string(), 0.0)].into_iter().collect())
    }
}
