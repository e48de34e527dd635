//! Model-backed scores (language id, embeddings, NSFW/CSAM probabilities)
//! behind one interface, with a deterministic built-in stub and a client for
//! the newline-delimited JSON sidecar.

mod sidecar;
mod stub;

use std::collections::BTreeMap;
use std::path::Path;

pub use sidecar::{Request, Response, SidecarClient};
pub use stub::{stub_embed, stub_lid, StubScorer, LANGUAGE_TABLE};

use crate::error::Result;

/// Named probabilities returned by the image safety ops.
pub type ScoreMap = BTreeMap<String, f64>;

/// Source of model scores. Implementations must be deterministic for the
/// pipeline's byte-identical output guarantee to hold.
pub trait Scorer: Send + Sync {
    /// Most probable languages for `text`, best first.
    fn lid(&self, text: &str) -> Result<Vec<(String, f64)>>;
    fn embed_text(&self, text: &str) -> Result<Vec<f32>>;
    fn embed_image(&self, path: &Path) -> Result<Vec<f32>>;
    /// Keys: `porn`, `hentai`, `nudenet_exposed_max`, `safer_porn`.
    fn nsfw_image(&self, path: &Path) -> Result<ScoreMap>;
    /// Key: `safer_csam`.
    fn csam_image(&self, path: &Path) -> Result<ScoreMap>;
}

impl<S: Scorer + ?Sized> Scorer for &S {
    fn lid(&self, text: &str) -> Result<Vec<(String, f64)>> {
        (**self).lid(text)
    }
    fn embed_text(&self, text: &str) -> Result<Vec<f32>> {
        (**self).embed_text(text)
    }
    fn embed_image(&self, path: &Path) -> Result<Vec<f32>> {
        (**self).embed_image(path)
    }
    fn nsfw_image(&self, path: &Path) -> Result<ScoreMap> {
        (**self).nsfw_image(path)
    }
    fn csam_image(&self, path: &Path) -> Result<ScoreMap> {
        (**self).csam_image(path)
    }
}

impl<S: Scorer + ?Sized> Scorer for Box<S> {
    fn lid(&self, text: &str) -> Result<Vec<(String, f64)>> {
        (**self).lid(text)
    }
    fn embed_text(&self, text: &str) -> Result<Vec<f32>> {
        (**self).embed_text(text)
    }
    fn embed_image(&self, path: &Path) -> Result<Vec<f32>> {
        (**self).embed_image(path)
    }
    fn nsfw_image(&self, path: &Path) -> Result<ScoreMap> {
        (**self).nsfw_image(path)
    }
    fn csam_image(&self, path: &Path) -> Result<ScoreMap> {
        (**self).csam_image(path)
    }
}

impl<S: Scorer + ?Sized> Scorer for std::sync::Arc<S> {
    fn lid(&self, text: &str) -> Result<Vec<(String, f64)>> {
        (**self).lid(text)
    }
    fn embed_text(&self, text: &str) -> Result<Vec<f32>> {
        (**self).embed_text(text)
    }
    fn embed_image(&self, path: &Path) -> Result<Vec<f32>> {
        (**self).embed_image(path)
    }
    fn nsfw_image(&self, path: &Path) -> Result<ScoreMap> {
        (**self).nsfw_image(path)
    }
    fn csam_image(&self, path: &Path) -> Result<ScoreMap> {
        (**self).csam_image(path)
    }
}

/// Retry schedule for scorer calls: `attempts` tries in total, sleeping
/// `backoff_ms * 2^k` between them.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RetryPolicy {
    pub attempts: u32,
    pub backoff_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            attempts: 3,
            backoff_ms: 50,
        }
    }
}

impl RetryPolicy {
    pub fn none() -> Self {
        RetryPolicy {
            attempts: 1,
            backoff_ms: 0,
        }
    }

    pub fn run<T>(&self, mut f: impl FnMut() -> Result<T>) -> Result<T> {
        let attempts = self.attempts.max(1);
        let mut last = None;
        for attempt in 0..attempts {
            match f() {
                Ok(v) => return Ok(v),
                Err(e) => {
                    log::debug!("scorer call failed (attempt {}): {e}", attempt + 1);
                    last = Some(e);
                    if attempt + 1 < attempts && self.backoff_ms > 0 {
                        let wait = self.backoff_ms.saturating_mul(1 << attempt.min(16));
                        std::thread::sleep(std::time::Duration::from_millis(wait));
                    }
                }
            }
        }
        Err(last.expect("at least one attempt"))
    }
}

/// Scales `v` to unit L2 norm in place. Zero vectors are left untouched.
pub fn normalize(v: &mut [f32]) {
    let norm = v.iter().map(|x| (*x as f64) * (*x as f64)).sum::<f64>().sqrt();
    if norm > 0.0 {
        for x in v.iter_mut() {
            *x = (*x as f64 / norm) as f32;
        }
    }
}
