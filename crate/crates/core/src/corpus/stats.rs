use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::sync::{Arc, Mutex};

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Granularity {
    Documents,
    TextNodes,
    Images,
    Urls,
    Records,
}

/// Counters for one stage at one granularity.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageStats {
    pub granularity: Granularity,
    #[serde(rename = "in")]
    pub items_in: u64,
    #[serde(rename = "dropped")]
    pub items_dropped: u64,
    pub reasons: BTreeMap<String, u64>,
}

impl StageStats {
    pub fn new(granularity: Granularity) -> Self {
        StageStats {
            granularity,
            items_in: 0,
            items_dropped: 0,
            reasons: BTreeMap::new(),
        }
    }

    pub fn add_in(&mut self, n: u64) {
        self.items_in += n;
    }

    pub fn add_drop(&mut self, reason: &str, n: u64) {
        if n == 0 {
            return;
        }
        self.items_dropped += n;
        *self.reasons.entry(reason.to_string()).or_default() += n;
    }

    pub fn items_out(&self) -> u64 {
        self.items_in - self.items_dropped
    }

    fn merge(&mut self, other: &StageStats) {
        self.items_in += other.items_in;
        self.items_dropped += other.items_dropped;
        for (k, v) in &other.reasons {
            *self.reasons.entry(k.clone()).or_default() += v;
        }
    }
}

/// Stage name → counters, in the order stages were first recorded. This is
/// the content of `stats.json`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StatsReport {
    pub stages: IndexMap<String, StageStats>,
}

impl StatsReport {
    pub fn stage_mut(&mut self, name: &str, granularity: Granularity) -> &mut StageStats {
        self.stages
            .entry(name.to_string())
            .or_insert_with(|| StageStats::new(granularity))
    }

    pub fn get(&self, name: &str) -> Option<&StageStats> {
        self.stages.get(name)
    }

    pub fn merge(&mut self, other: &StatsReport) {
        for (name, s) in &other.stages {
            match self.stages.get_mut(name) {
                Some(mine) => mine.merge(s),
                None => {
                    self.stages.insert(name.clone(), s.clone());
                }
            }
        }
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("stats serialize")
    }

    /// One row per (stage, reason); stages without drops get one row with
    /// an empty reason.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("stage,granularity,in,dropped,out,reason,count\n");
        for (name, s) in &self.stages {
            let g = serde_json::to_value(s.granularity).expect("granularity");
            let g = g.as_str().unwrap_or_default();
            let head = format!("{name},{g},{},{},{}", s.items_in, s.items_dropped, s.items_out());
            if s.reasons.is_empty() {
                out.push_str(&format!("{head},,0\n"));
            }
            for (reason, n) in &s.reasons {
                out.push_str(&format!("{head},{reason},{n}\n"));
            }
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut body = self.to_json_pretty();
        body.push('\n');
        fs::write(path, body).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let body = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&body)?)
    }
}

/// Cloneable handle to a shared [`StatsReport`], for stages that count from
/// several worker threads.
#[derive(Clone, Debug, Default)]
pub struct StatsRecorder {
    inner: Arc<Mutex<StatsReport>>,
}

impl StatsRecorder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_in(&self, stage: &str, granularity: Granularity, n: u64) {
        let mut report = self.inner.lock().unwrap();
        report.stage_mut(stage, granularity).add_in(n);
    }

    pub fn add_drop(&self, stage: &str, granularity: Granularity, reason: &str, n: u64) {
        let mut report = self.inner.lock().unwrap();
        report.stage_mut(stage, granularity).add_drop(reason, n);
    }

    /// Makes sure `stage` shows up in the report even if nothing was counted.
    pub fn touch(&self, stage: &str, granularity: Granularity) {
        let mut report = self.inner.lock().unwrap();
        report.stage_mut(stage, granularity);
    }

    pub fn snapshot(&self) -> StatsReport {
        self.inner.lock().unwrap().clone()
    }
}
