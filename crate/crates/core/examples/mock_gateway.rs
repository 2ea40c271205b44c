//! Keyword generation and relevance rating through the gateway. Without
//! arguments the offline backend answers; pass an OpenAI-compatible endpoint
//! and model name to query a served model instead.
//!
//!     cargo run --example mock_gateway [-- http://localhost:8000 my-model]

use subject_ensemble::llm::{parse_keywords, Gateway, ModelConfig};
use subject_ensemble::prompting::DEFAULT_RANK_TEMPLATE;

fn main() -> subject_ensemble::Result<()> {
    let mut args = std::env::args().skip(1);
    let model = match (args.next(), args.next()) {
        (Some(endpoint), Some(name)) => ModelConfig {
            endpoint,
            ..ModelConfig::mock(name)
        },
        _ => ModelConfig::mock("offline"),
    };
    let gateway = Gateway::new(1);
    let text = "Windenergie und Klimapolitik in Niedersachsen: eine Bestandsaufnahme der Energiewende";
    let prompt = format!("Text: {text}\nSchlagwörter:");
    let completion = gateway.generate_completion(&model, &prompt, text)?;
    let keywords = parse_keywords(&completion);
    println!("keywords: {keywords:?}");
    for k in &keywords {
        let score = gateway.rank_relevance(&model, text, k, DEFAULT_RANK_TEMPLATE, 10)?;
        println!("  {k:<20} {score:?} -> {:.1}", score.normalized(10, 0.5));
    }
    println!("{} requests", gateway.request_count());
    Ok(())
}
