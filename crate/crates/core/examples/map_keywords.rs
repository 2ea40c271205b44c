//! Maps free keywords onto vocabulary concepts with the hybrid index and shows
//! how the fusion weight moves the top hit.
//!
//!     cargo run --example map_keywords

use subject_ensemble::mapping::{build_index, map_keywords, Embedder, IndexParams, MappingParams};
use subject_ensemble::synthetic;

fn main() -> subject_ensemble::Result<()> {
    let vocab = synthetic::vocabulary();
    let embedder = Embedder::hashed(256)?;
    let index = build_index(&vocab, &embedder, IndexParams::default())?;
    println!("{} labels indexed", index.len());

    let keywords = ["Windpolitik", "wind energy policy", "Klimaforschung", "Bodenschutz", "Hamburg", "Quantenchemie"];
    for w in [1.0, 0.75, 0.0] {
        println!("\nhybrid weight {w}");
        for k in keywords {
            let v = embedder.embed(k)?;
            let hits = index.hybrid_search(&v, k, w, 3);
            let shown: Vec<String> = hits
                .iter()
                .map(|h| format!("{} {:.2}/{:.2}", vocab.require(&h.concept_id).unwrap().pref_label, h.fused_score, h.cosine_sim))
                .collect();
            println!("  {k:<20} {}", shown.join(", "));
        }
    }

    let pairs: Vec<(String, String)> = keywords.iter().map(|k| (k.to_string(), "demo".to_string())).collect();
    let mapped = map_keywords(&index, &embedder, "doc", &pairs, &MappingParams::default())?;
    println!("\nkept at threshold 0.6:");
    for m in mapped {
        println!("  {:<20} -> {} ({:.2})", m.keyword, m.concept_id, m.similarity);
    }
    Ok(())
}
