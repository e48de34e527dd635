use crate::error::{Error, Result};
use crate::scorer::ScoreMap;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NsfwThresholds {
    pub porn_hentai_sum: f64,
    pub nudenet_exposed: f64,
    pub safer_porn: f64,
    pub csam: f64,
}

impl Default for NsfwThresholds {
    fn default() -> Self {
        NsfwThresholds {
            porn_hentai_sum: 0.8,
            nudenet_exposed: 0.5,
            safer_porn: 0.8,
            csam: 0.4,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SafetyVerdict {
    Safe,
    Nsfw,
    Csam,
}

impl SafetyVerdict {
    pub fn as_str(self) -> &'static str {
        match self {
            SafetyVerdict::Safe => "safe",
            SafetyVerdict::Nsfw => "nsfw",
            SafetyVerdict::Csam => "csam",
        }
    }
}

fn get(scores: &ScoreMap, key: &str) -> Result<f64> {
    scores
        .get(key)
        .copied()
        .ok_or_else(|| Error::MissingScore(key.to_string()))
}

/// Two-stage adult-content rule plus the recall-biased CSAM rule. `scores`
/// must carry `porn`, `hentai`, `nudenet_exposed_max`, `safer_porn` and
/// `safer_csam`; a missing key is an error, never a silent pass.
pub fn nsfw_gate(scores: &ScoreMap, t: &NsfwThresholds) -> Result<SafetyVerdict> {
    let csam = get(scores, "safer_csam")?;
    let porn = get(scores, "porn")?;
    let hentai = get(scores, "hentai")?;
    let nudenet = get(scores, "nudenet_exposed_max")?;
    let safer_porn = get(scores, "safer_porn")?;
    if csam > t.csam {
        return Ok(SafetyVerdict::Csam);
    }
    let candidate = porn + hentai > t.porn_hentai_sum;
    if (candidate && nudenet > t.nudenet_exposed) || safer_porn > t.safer_porn {
        return Ok(SafetyVerdict::Nsfw);
    }
    Ok(SafetyVerdict::Safe)
}
