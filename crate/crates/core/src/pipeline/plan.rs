use std::collections::{BTreeMap, BTreeSet};

/// Languages a dump is processed for: everything except `excluded`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LangPlan {
    pub excluded: BTreeSet<String>,
}

impl LangPlan {
    pub fn allows(&self, lang: &str) -> bool {
        !self.excluded.contains(lang)
    }
}

/// First dump: every language. Second: all but the `k` largest by prior
/// document count. Third and later: only languages with fewer than
/// `threshold` documents. Without counts every dump takes every language.
pub fn per_language_extraction_plan(
    dumps: usize,
    counts: &BTreeMap<String, u64>,
    k: usize,
    threshold: u64,
) -> Vec<LangPlan> {
    let mut by_size: Vec<(&String, &u64)> = counts.iter().collect();
    by_size.sort_by(|a, b| b.1.cmp(a.1).then_with(|| a.0.cmp(b.0)));
    let top_k: BTreeSet<String> = by_size.iter().take(k).map(|(l, _)| (*l).clone()).collect();
    let large: BTreeSet<String> = counts
        .iter()
        .filter(|(_, &c)| c >= threshold)
        .map(|(l, _)| l.clone())
        .collect();
    (0..dumps)
        .map(|d| match d {
            0 => LangPlan::default(),
            1 => LangPlan {
                excluded: top_k.clone(),
            },
            _ => LangPlan {
                excluded: large.clone(),
            },
        })
        .collect()
}
