//! Full pipeline in memory on the synthetic corpus with offline backends:
//! generate, map, summarise, rank, combine, then evaluate.
//!
//!     cargo run --example end_to_end

use subject_ensemble::evaluation::{evaluate, gold_from_records, PatkDenominator};
use subject_ensemble::llm::{EnsembleMember, Gateway, ModelConfig};
use subject_ensemble::mapping::{build_index, Embedder, IndexParams};
use subject_ensemble::pipeline::{run_pipeline, PipelineConfig, PromptBook};
use subject_ensemble::prompting::{standard_prompt_specs, DEFAULT_COMPLETE_TEMPLATE};
use subject_ensemble::synthetic;

fn main() -> subject_ensemble::Result<()> {
    let corpus = synthetic::corpus(2024);
    let specs = standard_prompt_specs(2024);
    let prompts = PromptBook::build(&specs, &corpus.train, &corpus.vocabulary, DEFAULT_COMPLETE_TEMPLATE)?;
    let members: Vec<EnsembleMember> = ["mock-a", "mock-b"]
        .iter()
        .flat_map(|m| specs.iter().map(move |s| EnsembleMember::new(ModelConfig::mock(*m), s.prompt_id.clone())))
        .collect();
    let embedder = Embedder::hashed(512)?;
    let index = build_index(&corpus.vocabulary, &embedder, IndexParams::default())?;
    let gateway = Gateway::new(2024);
    let run = run_pipeline(
        &corpus.docs,
        &members,
        &prompts,
        &corpus.vocabulary,
        &index,
        &embedder,
        &gateway,
        &PipelineConfig::default(),
    )?;
    println!(
        "{} members, {} requests, {} mapped keywords, {} ensemble suggestions",
        members.len(),
        gateway.request_count(),
        run.mapped.len(),
        run.ensemble.len()
    );
    for doc in run.documents.iter().take(3) {
        let top: Vec<String> = doc
            .suggestions
            .iter()
            .take(5)
            .map(|s| format!("{}:{:.2}", s.concept_id, s.s_fin))
            .collect();
        println!("{} {}", doc.doc_id, top.join(" "));
    }
    let gold = gold_from_records(&corpus.docs);
    let report = evaluate(&run.suggestions(), &gold, &[5, 10], PatkDenominator::K)?;
    println!(
        "P@5 {:.3}  R@5 {:.3}  F1@5 {:.3}  PR-AUC {:.3}",
        report.p_at[&5], report.r_at[&5], report.f1_at[&5], report.pr_auc
    );
    Ok(())
}
