//! Geometry and URL rules, the NSFW/CSAM gate and per-language caps.

use mmcorpus::corpus::{DocId, Document, ImageNode, Node};
use mmcorpus::images::{geometry_filter, nsfw_gate, url_rule_filter, ImageRuleConfig, LanguageCaps, NsfwThresholds};
use mmcorpus::scorer::ScoreMap;

fn scores(pairs: &[(&str, f64)]) -> ScoreMap {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

fn main() {
    let rules = ImageRuleConfig::default();
    for (w, h) in [(640, 480), (149, 400), (900, 200), (450, 150)] {
        println!("{w}x{h}: {:?}", geometry_filter(w, h, &rules).map_err(|e| e.as_str()));
    }
    for url in ["https://x.test/photos/cat.jpg", "https://x.test/static/logo.png"] {
        println!("{url}: {:?}", url_rule_filter(url, &rules).map_err(|e| e.as_str()));
    }

    let t = NsfwThresholds::default();
    let base = [("porn", 0.0), ("hentai", 0.0), ("nudenet_exposed_max", 0.0), ("safer_porn", 0.0), ("safer_csam", 0.0)];
    let mut cases = vec![("clean", scores(&base))];
    let mut flagged = scores(&base);
    flagged.insert("porn".into(), 0.7);
    flagged.insert("hentai".into(), 0.2);
    flagged.insert("nudenet_exposed_max".into(), 0.9);
    cases.push(("porn+hentai with nudity", flagged.clone()));
    flagged.insert("nudenet_exposed_max".into(), 0.1);
    cases.push(("porn+hentai, no nudity", flagged));
    for (name, s) in cases {
        println!("{name}: {:?}", nsfw_gate(&s, &t));
    }

    // the same image URL on twelve pages of one language
    let mut caps = LanguageCaps::new(10);
    let kept: Vec<u64> = (0..12)
        .map(|i| {
            let mut img = ImageNode::new("https://cdn.test/banner.jpg");
            img.phash = Some(42);
            let mut d = Document::new(DocId(i), "u", vec![Node::text("p", "t"), Node::Image(img)]);
            1 - caps.apply(&mut d)
        })
        .collect();
    println!("kept per page: {kept:?}");
}
