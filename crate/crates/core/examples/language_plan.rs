//! Which languages each crawl dump contributes: everything from the first,
//! all but the largest from the second, only small languages after that.

use std::collections::BTreeMap;

use mmcorpus::pipeline::per_language_extraction_plan;

fn main() {
    let counts: BTreeMap<String, u64> = [
        ("eng_Latn", 40_000_000),
        ("deu_Latn", 9_000_000),
        ("fra_Latn", 8_000_000),
        ("swh_Latn", 600_000),
        ("yor_Latn", 45_000),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect();
    let plan = per_language_extraction_plan(3, &counts, 1, 1_000_000);
    for (i, p) in plan.iter().enumerate() {
        let allowed: Vec<&str> = counts.keys().filter(|l| p.allows(l)).map(String::as_str).collect();
        println!("dump {}: {allowed:?}", i + 1);
    }
}
