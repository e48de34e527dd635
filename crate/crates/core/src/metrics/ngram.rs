use std::collections::HashSet;

use serde::Serialize;

use crate::error::{Error, Result};

/// Unique / total word n-grams for n = 1..=max_n, pooled over a sample.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NgramDiversity {
    /// `ratios[n-1]`; `None` when no document has n tokens.
    pub ratios: Vec<Option<f64>>,
    /// Mean over the defined ratios.
    pub mean: Option<f64>,
}

/// Lowercased, Unicode-whitespace tokens.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace().map(str::to_lowercase).collect()
}

pub fn distinct_ngram_ratio<'a, I>(texts: I, max_n: usize) -> Result<NgramDiversity>
where
    I: IntoIterator<Item = &'a str>,
{
    let docs: Vec<Vec<String>> = texts.into_iter().map(tokenize).collect();
    if docs.is_empty() {
        return Err(Error::Empty("n-gram sample"));
    }
    let mut ratios = Vec::with_capacity(max_n);
    for n in 1..=max_n {
        let mut unique: HashSet<&[String]> = HashSet::new();
        let mut total = 0usize;
        for toks in &docs {
            if toks.len() < n {
                continue;
            }
            for w in toks.windows(n) {
                unique.insert(w);
                total += 1;
            }
        }
        ratios.push((total > 0).then(|| unique.len() as f64 / total as f64));
    }
    let defined: Vec<f64> = ratios.iter().flatten().copied().collect();
    let mean = (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64);
    Ok(NgramDiversity { ratios, mean })
}
