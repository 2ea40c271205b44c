//! Stratified sampling: draws disjoint evaluation subsets that keep the
//! language × record type mix of the corpus.
//!
//!     cargo run --example split_corpus

use std::collections::BTreeMap;

use subject_ensemble::corpus::{strata, stratified_disjoint_split};
use subject_ensemble::synthetic;

fn main() -> subject_ensemble::Result<()> {
    let vocab = synthetic::vocabulary();
    let corpus = synthetic::documents(&vocab, 200, 7);
    println!("corpus strata:");
    for s in strata(&corpus) {
        println!("  {:>2} {:<10} {:.3}", s.language, s.record_type, s.proportion);
    }

    let subsets = stratified_disjoint_split(&corpus, 40, 3, 11)?;
    for (i, subset) in subsets.iter().enumerate() {
        let mut counts: BTreeMap<String, usize> = BTreeMap::new();
        for r in subset {
            *counts.entry(format!("{}/{}", r.language, r.record_type)).or_default() += 1;
        }
        println!("subset {i}: {} records {counts:?}", subset.len());
    }
    Ok(())
}
