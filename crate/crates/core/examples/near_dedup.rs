//! Within-document Levenshtein dedup, then cross-document MinHash LSH.

use mmcorpus::corpus::{DocId, Document, Node};
use mmcorpus::dedup::{
    estimate_jaccard, feature_set, lsh_dedup, node_dedup, optimal_params, FeatureConfig, LevConvention, MinHasher,
};

fn main() {
    let doc = Document::new(
        DocId(1),
        "u",
        vec![
            Node::text("p", "Fresh bread every morning from the corner bakery."),
            Node::text("p", "Fresh bread every morning from the corner bakery!"),
            Node::text("p", "Fresh bread every morning from the corner bakery."),
            Node::text("p", "Croissants sell out before nine."),
        ],
    );
    let (doc, counts) = node_dedup(doc, 0.95, LevConvention::MaxLen);
    println!("node dedup: {counts:?}, {} nodes left", doc.text_node_count());

    let texts = [
        "the river rises every spring and floods the lower meadow near the mill",
        "the river rises every spring and floods the lower meadow near the old mill",
        "a recipe for onion soup with thyme, butter and a splash of white wine",
    ];
    let hasher = MinHasher::new(256, 7);
    let fc = FeatureConfig::default();
    let sigs: Vec<_> = texts.iter().map(|t| hasher.signature(&feature_set(t, &fc))).collect();
    println!("J(0,1) ≈ {:.3}", estimate_jaccard(&sigs[0], &sigs[1]));
    println!("J(0,2) ≈ {:.3}", estimate_jaccard(&sigs[0], &sigs[2]));

    let params = optimal_params(0.8, 256);
    println!("bands={} rows={}", params.bands, params.rows);
    let dropped = lsh_dedup(sigs.into_iter().enumerate().map(|(i, s)| (DocId(i as u128), s)), params);
    println!("dropped: {dropped:?}");
}
