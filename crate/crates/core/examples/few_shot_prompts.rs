//! Samples few-shot examples for each of the fifteen prompt configurations and
//! prints one assembled prompt.
//!
//!     cargo run --example few_shot_prompts

use subject_ensemble::prompting::{
    assemble_prompt, lemma_overlap, sample_examples, standard_prompt_specs, DEFAULT_COMPLETE_TEMPLATE,
};
use subject_ensemble::synthetic;

fn main() -> subject_ensemble::Result<()> {
    let corpus = synthetic::corpus(5);
    for spec in standard_prompt_specs(5) {
        let prompt = sample_examples(&corpus.train, &spec, &corpus.vocabulary)?;
        let overlaps: Vec<String> = prompt
            .examples
            .iter()
            .map(|e| lemma_overlap(&e.text, &e.labels).map(|o| format!("{o:.2}")))
            .collect::<subject_ensemble::Result<_>>()?;
        println!(
            "{} {:?} n={} labels={:?} overlap={:?} -> [{}]",
            spec.prompt_id,
            spec.language_mode,
            spec.n_examples,
            spec.label_count_range,
            spec.lemma_overlap_range,
            overlaps.join(" ")
        );
    }

    let spec = &standard_prompt_specs(5)[11];
    let prompt = sample_examples(&corpus.train, spec, &corpus.vocabulary)?;
    let text = corpus.docs[0].text();
    println!("\n{}", assemble_prompt(&prompt, &text, DEFAULT_COMPLETE_TEMPLATE)?);
    Ok(())
}
