//! Ensemble selection on cached outputs: Monte-Carlo subset search, chain
//! pruning and the fixed selection strategies.
//!
//!     cargo run --example optimize_ensemble

use subject_ensemble::ensemble_opt::{
    build_strategy_subset, optimize, rank_members, CachedEnsemble, Objective, OptimizeConfig, Strategy,
};
use subject_ensemble::evaluation::gold_from_records;
use subject_ensemble::llm::{EnsembleMember, Gateway, ModelConfig};
use subject_ensemble::mapping::{build_index, Embedder, IndexParams};
use subject_ensemble::pipeline::{run_pipeline, CombineConfig, PipelineConfig, PromptBook};
use subject_ensemble::prompting::{standard_prompt_specs, DEFAULT_COMPLETE_TEMPLATE};
use subject_ensemble::synthetic;

fn main() -> subject_ensemble::Result<()> {
    let corpus = synthetic::corpus(77);
    let specs = standard_prompt_specs(77);
    let prompts = PromptBook::build(&specs, &corpus.train, &corpus.vocabulary, DEFAULT_COMPLETE_TEMPLATE)?;
    let members: Vec<EnsembleMember> = ["mock-a", "mock-b", "mock-c"]
        .iter()
        .flat_map(|m| specs.iter().map(move |s| EnsembleMember::new(ModelConfig::mock(*m), s.prompt_id.clone())))
        .collect();
    let embedder = Embedder::hashed(256)?;
    let index = build_index(&corpus.vocabulary, &embedder, IndexParams::default())?;
    let run = run_pipeline(
        &corpus.docs,
        &members,
        &prompts,
        &corpus.vocabulary,
        &index,
        &embedder,
        &Gateway::new(77),
        &PipelineConfig::default(),
    )?;

    let ids: Vec<String> = members.iter().map(|m| m.member_id.clone()).collect();
    let cache = CachedEnsemble::new(&ids, &run.mapped, &run.ranked, gold_from_records(&corpus.docs), CombineConfig::default())?
        .with_target_filter(&corpus.vocabulary);
    println!("full ensemble of {}: PR-AUC {:.4}", ids.len(), cache.objective(&ids)?);

    let ranking = rank_members(&cache, &ids)?;
    let ranked_ids: Vec<String> = ranking.iter().flat_map(|s| s.member_ids.clone()).collect();
    let strategies = [
        ("top-5 members", Strategy::TopK { ranking: ranked_ids, k: 5 }),
        ("mock-a, all prompts", Strategy::OneModelAllPrompts { model: "mock-a".into() }),
        ("p12, all models", Strategy::OnePromptAllModels { prompt: "p12".into() }),
        ("mock-b with p01", Strategy::OneModelOnePrompt { model: "mock-b".into(), prompt: "p01".into() }),
    ];
    for (name, s) in &strategies {
        let subset = build_strategy_subset(&members, s)?;
        println!("{name:<22} {:>2} members  PR-AUC {:.4}", subset.len(), cache.objective(&subset)?);
    }

    let report = optimize(
        &cache,
        &ids,
        &OptimizeConfig {
            budget: 150,
            size_range: (10, 30),
            target_size: 5,
            epsilon: 0.0,
            seed: 1,
        },
    )?;
    println!(
        "monte carlo: {} samples, best {} members at {:.4}",
        report.samples_evaluated,
        report.monte_carlo.len(),
        report.monte_carlo.objective
    );
    for step in &report.trace {
        println!(
            "  drop {:<14} {:.4} -> {:.4}{}",
            step.removed,
            step.objective_before,
            step.objective_after,
            if step.forced { " (size target)" } else { "" }
        );
    }
    println!("chosen: {:?} at {:.4}", report.chosen.member_ids, report.chosen.objective);
    Ok(())
}
