//! Loads a vocabulary and removes suggestions outside the target collection.
//!
//!     cargo run --example vocabulary_filter

use subject_ensemble::pipeline::ScoredSuggestion;
use subject_ensemble::synthetic;
use subject_ensemble::vocabulary::{filter_to_target, load_vocabulary, write_vocabulary};

fn main() -> subject_ensemble::Result<()> {
    let dir = std::env::temp_dir().join("subjex-vocabulary-example");
    std::fs::create_dir_all(&dir).expect("temp dir");
    let path = dir.join("vocab.tsv");
    write_vocabulary(&path, &synthetic::vocabulary())?;
    let vocab = load_vocabulary(&path)?;
    let (target, extension) = vocab.counts();
    println!("{} concepts: {target} target, {extension} extension", vocab.len());

    let suggestions: Vec<ScoredSuggestion> = ["t001", "e03", "t042", "e10"]
        .iter()
        .enumerate()
        .map(|(i, c)| ScoredSuggestion {
            doc_id: "doc".into(),
            concept_id: c.to_string(),
            s_ens: 0.5,
            s_rel: 0.5,
            s_fin: 0.5,
            rank: i + 1,
        })
        .collect();
    let kept = filter_to_target(&suggestions, &vocab)?;
    for s in &kept {
        println!("kept {} ({})", s.concept_id, vocab.require(&s.concept_id)?.pref_label);
    }
    assert_eq!(filter_to_target(&kept, &vocab)?, kept);
    Ok(())
}
