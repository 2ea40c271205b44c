mod common;

use common::{dead_url, serve};
use subject_ensemble::llm::{Gateway, ModelConfig, RankScore};
use subject_ensemble::mapping::embed::{Embedder, EmbedderConfig, EmbedderKind};
use subject_ensemble::prompting::DEFAULT_RANK_TEMPLATE;
use subject_ensemble::Error;

fn model(endpoint: &str, retries: u32) -> ModelConfig {
    ModelConfig {
        endpoint: endpoint.to_string(),
        max_retries: retries,
        retry_backoff_ms: 1,
        request_timeout_ms: 2_000,
        ..ModelConfig::mock("stub-model")
    }
}

fn completion(text: &str) -> String {
    serde_json::json!({ "choices": [{ "text": text }] }).to_string()
}

#[test]
fn completion_round_trip_sends_model_and_prompt() {
    let stub = serve(|body| {
        let v: serde_json::Value = serde_json::from_str(body).unwrap();
        assert_eq!(v["model"], "stub-model");
        assert_eq!(v["min_tokens"], 24);
        assert_eq!(v["max_tokens"], 100);
        assert!(v["prompt"].as_str().unwrap().ends_with("Schlagwörter:"));
        (200, completion(" Geschichte, Politik"))
    });
    let gw = Gateway::new(0);
    let out = gw
        .generate_completion(&model(&stub.url, 0), "Text: x\nSchlagwörter:", "x")
        .unwrap();
    assert_eq!(out, " Geschichte, Politik");
    assert_eq!(gw.request_count(), 1);
    assert_eq!(stub.hits(), 1);
}

#[test]
fn unreachable_endpoint_is_a_transport_error_after_retries() {
    let gw = Gateway::new(0);
    let err = gw.generate_completion(&model(&dead_url(), 2), "p", "q").unwrap_err();
    match err {
        Error::Transport { attempts, .. } => assert_eq!(attempts, 3),
        other => panic!("expected transport error, got {other:?}"),
    }
    assert_eq!(gw.request_count(), 3);
}

#[test]
fn server_errors_are_retried_then_succeed() {
    let calls = std::sync::atomic::AtomicUsize::new(0);
    let stub = serve(move |_| {
        if calls.fetch_add(1, std::sync::atomic::Ordering::SeqCst) < 2 {
            (503, "{}".into())
        } else {
            (200, completion("A, B"))
        }
    });
    let gw = Gateway::new(0);
    assert_eq!(gw.generate_completion(&model(&stub.url, 3), "p", "q").unwrap(), "A, B");
    assert_eq!(stub.hits(), 3);
}

#[test]
fn client_errors_are_fatal_without_retry() {
    let stub = serve(|_| (401, r#"{"error":"bad key"}"#.into()));
    let gw = Gateway::new(0);
    let err = gw.generate_completion(&model(&stub.url, 3), "p", "q").unwrap_err();
    assert!(matches!(err, Error::BackendStatus { status: 401, .. }), "{err:?}");
    assert_eq!(stub.hits(), 1);
}

#[test]
fn rank_reply_is_parsed_and_failures_become_unscored() {
    let stub = serve(|_| (200, completion(" 7")));
    let gw = Gateway::new(0);
    let s = gw
        .rank_relevance(&model(&stub.url, 0), "Ein Text", "Schlagwort", DEFAULT_RANK_TEMPLATE, 10)
        .unwrap();
    assert_eq!(s, RankScore::Scored(7));

    let garbage = serve(|_| (200, completion("keine Ahnung")));
    let s = gw
        .rank_relevance(&model(&garbage.url, 2), "Ein Text", "Schlagwort", DEFAULT_RANK_TEMPLATE, 10)
        .unwrap();
    assert_eq!(s, RankScore::Unscored);
    assert_eq!(garbage.hits(), 3);

    let s = gw
        .rank_relevance(&model(&dead_url(), 0), "Ein Text", "Schlagwort", DEFAULT_RANK_TEMPLATE, 10)
        .unwrap();
    assert_eq!(s, RankScore::Unscored);
}

fn http_embedder(url: &str, dimension: usize) -> Embedder {
    Embedder::new(EmbedderConfig {
        kind: EmbedderKind::HttpService,
        dimension,
        endpoint: Some(url.to_string()),
        request_timeout_ms: 2_000,
    })
    .unwrap()
}

#[test]
fn http_embedder_normalizes_service_vectors() {
    let stub = serve(|body| {
        let v: serde_json::Value = serde_json::from_str(body).unwrap();
        let n = v["inputs"].as_array().unwrap().len();
        let vectors: Vec<Vec<f32>> = (0..n).map(|i| {
            let mut x = vec![0.0; 8];
            x[i % 8] = 3.0;
            x[(i + 1) % 8] = 4.0;
            x
        }).collect();
        (200, serde_json::to_string(&vectors).unwrap())
    });
    let e = http_embedder(&stub.url, 8);
    let texts: Vec<String> = (0..40).map(|i| format!("text {i}")).collect();
    let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
    let out = e.embed_batch(&refs).unwrap();
    assert_eq!(out.len(), 40);
    // 40 inputs in batches of at most 32
    assert_eq!(stub.hits(), 2);
    assert!((out[0][0] - 0.6).abs() < 1e-6 && (out[0][1] - 0.8).abs() < 1e-6);
}

#[test]
fn http_embedder_rejects_wrong_dimension_and_dead_service() {
    let stub = serve(|_| (200, "[[1.0, 0.0]]".into()));
    let err = http_embedder(&stub.url, 8).embed("x").unwrap_err();
    assert!(matches!(err, Error::Embedding { .. }), "{err:?}");
    let err = http_embedder(&dead_url(), 8).embed("x").unwrap_err();
    assert!(matches!(err, Error::Embedding { .. }), "{err:?}");
}
