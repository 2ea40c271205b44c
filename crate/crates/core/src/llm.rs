//! Completion and relevance-rating requests against an LLM backend.
//!
//! Two backends are supported, selected by [`ModelConfig::endpoint`]:
//!
//! * an HTTP completions server speaking the common open-source JSON protocol
//!   (`POST {endpoint}/v1/completions` with `model`, `prompt`, `temperature`,
//!   `min_tokens`, `max_tokens`; the reply's `choices[0].text` is used);
//! * the literal endpoint `mock`, a deterministic offline backend.
//!
//! Each model gets its own in-flight cap; transient failures (connection
//! errors, timeouts, 429 and 5xx replies) are retried with exponential backoff.

use std::collections::{HashMap, HashSet};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{char_trigrams, stable_hash, stable_hash_seeded};
use crate::prompting::assemble_rank_prompt;

pub const MOCK_ENDPOINT: &str = "mock";
pub const MAX_KEYWORD_CHARS: usize = 120;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub model_id: String,
    pub endpoint: String,
    pub temperature: f64,
    pub min_tokens: u32,
    pub max_tokens: u32,
    pub request_timeout_ms: u64,
    pub max_retries: u32,
    pub retry_backoff_ms: u64,
    pub max_in_flight: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            model_id: String::new(),
            endpoint: MOCK_ENDPOINT.into(),
            temperature: 0.0,
            min_tokens: 24,
            max_tokens: 100,
            request_timeout_ms: 60_000,
            max_retries: 3,
            retry_backoff_ms: 500,
            max_in_flight: 8,
        }
    }
}

impl ModelConfig {
    pub fn mock(model_id: impl Into<String>) -> Self {
        Self {
            model_id: model_id.into(),
            ..Self::default()
        }
    }

    pub fn is_mock(&self) -> bool {
        self.endpoint == MOCK_ENDPOINT
    }

    pub fn validate(&self) -> Result<()> {
        if self.model_id.is_empty() {
            return Err(Error::InvalidArgument("model_id must not be empty".into()));
        }
        if self.min_tokens > self.max_tokens {
            return Err(Error::InvalidArgument(format!(
                "{}: min_tokens {} exceeds max_tokens {}",
                self.model_id, self.min_tokens, self.max_tokens
            )));
        }
        if !(self.temperature >= 0.0) {
            return Err(Error::InvalidArgument(format!("{}: temperature must be >= 0", self.model_id)));
        }
        Ok(())
    }
}

/// One model × prompt combination.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleMember {
    pub member_id: String,
    pub model: ModelConfig,
    pub prompt_spec_id: String,
}

impl EnsembleMember {
    pub fn new(model: ModelConfig, prompt_spec_id: impl Into<String>) -> Self {
        let prompt_spec_id = prompt_spec_id.into();
        Self {
            member_id: member_id(&model.model_id, &prompt_spec_id),
            model,
            prompt_spec_id,
        }
    }
}

pub fn member_id(model_id: &str, prompt_spec_id: &str) -> String {
    format!("{model_id}×{prompt_spec_id}")
}

/// Relevance reply after parsing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RankScore {
    Scored(u8),
    Unscored,
}

impl RankScore {
    pub fn normalized(self, scale_max: u8, default: f64) -> f64 {
        match self {
            RankScore::Scored(v) => f64::from(v.min(scale_max)) / f64::from(scale_max.max(1)),
            RankScore::Unscored => default,
        }
    }
}

/// Splits a completion into keywords.
///
/// Separators are commas, semicolons and newlines. Leading list markers
/// (`-`, `*`, `•`, `1.`, `1)` followed by whitespace) are stripped, keywords
/// are trimmed, cut to [`MAX_KEYWORD_CHARS`] characters and deduplicated
/// case-insensitively keeping the first spelling.
pub fn parse_keywords(completion: &str) -> Vec<String> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for piece in completion.split([',', ';', '\n']) {
        let mut kw = strip_list_markers(piece);
        if kw.chars().count() > MAX_KEYWORD_CHARS {
            kw = kw.chars().take(MAX_KEYWORD_CHARS).collect::<String>().trim_end().to_string();
            kw = strip_list_markers(&kw);
        }
        if kw.is_empty() {
            continue;
        }
        if seen.insert(kw.to_lowercase()) {
            out.push(kw);
        }
    }
    out
}

fn strip_list_markers(piece: &str) -> String {
    let mut s = piece.trim();
    loop {
        let rest = if let Some(r) = s.strip_prefix(['-', '*', '•']) {
            Some(r)
        } else {
            let digits = s.len() - s.trim_start_matches(|c: char| c.is_ascii_digit()).len();
            if digits > 0 {
                s[digits..].strip_prefix(['.', ')'])
            } else {
                None
            }
        };
        match rest {
            Some(r) if r.is_empty() || r.starts_with(char::is_whitespace) => s = r.trim_start(),
            _ => return s.trim_end().to_string(),
        }
    }
}

/// First integer in a reply, clamped to `[0, scale_max]`; a minus sign
/// directly before the digits clamps to zero.
pub fn parse_rank_reply(reply: &str, scale_max: u8) -> RankScore {
    let bytes = reply.as_bytes();
    let Some(start) = bytes.iter().position(u8::is_ascii_digit) else {
        return RankScore::Unscored;
    };
    let end = bytes[start..]
        .iter()
        .position(|b| !b.is_ascii_digit())
        .map_or(bytes.len(), |p| start + p);
    if start > 0 && bytes[start - 1] == b'-' {
        return RankScore::Scored(0);
    }
    let value = reply[start..end].parse::<u64>().unwrap_or(u64::MAX);
    RankScore::Scored(value.min(u64::from(scale_max)) as u8)
}

/// Offline keyword generator: the 3–8 longest distinct alphabetic tokens of the
/// query, longest first and ties in lexicographic order. The count is drawn
/// from a hash of the seed and the prompt.
pub fn mock_generate(prompt: &str, query_text: &str, seed: u64) -> String {
    let mut seen = HashSet::new();
    let mut tokens: Vec<&str> = query_text
        .split(|c: char| !c.is_alphabetic())
        .filter(|t| !t.is_empty())
        .filter(|t| seen.insert(t.to_lowercase()))
        .collect();
    tokens.sort_by(|a, b| {
        b.chars()
            .count()
            .cmp(&a.chars().count())
            .then_with(|| a.to_lowercase().cmp(&b.to_lowercase()))
            .then_with(|| a.cmp(b))
    });
    let count = 3 + (stable_hash_seeded(seed, prompt.as_bytes()) % 6) as usize;
    tokens.truncate(count);
    tokens.join(", ")
}

/// Offline relevance rater: share of the keyword's character 3-grams found in
/// the text, on a 0–10 scale.
pub fn mock_rank(text: &str, keyword: &str) -> String {
    let kw = char_trigrams(keyword);
    if kw.is_empty() {
        return "0".into();
    }
    let text_grams: HashSet<String> = char_trigrams(text).into_iter().collect();
    let hits = kw.iter().filter(|g| text_grams.contains(*g)).count();
    format!("{}", (10.0 * hits as f64 / kw.len() as f64).round() as u8)
}

struct Limiter {
    cap: usize,
    in_flight: Mutex<usize>,
    cv: Condvar,
}

struct Permit<'a>(&'a Limiter);

impl Limiter {
    fn new(cap: usize) -> Self {
        Self {
            cap: cap.max(1),
            in_flight: Mutex::new(0),
            cv: Condvar::new(),
        }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut n = self.in_flight.lock().expect("limiter poisoned");
        while *n >= self.cap {
            n = self.cv.wait(n).expect("limiter poisoned");
        }
        *n += 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        let mut n = self.0.in_flight.lock().expect("limiter poisoned");
        *n -= 1;
        self.0.cv.notify_one();
    }
}

enum Attempt {
    Done(String),
    Transient(String),
    Fatal(Error),
}

#[derive(Serialize)]
struct CompletionRequest<'a> {
    model: &'a str,
    prompt: &'a str,
    temperature: f64,
    min_tokens: u32,
    max_tokens: u32,
}

#[derive(Deserialize)]
struct CompletionResponse {
    choices: Vec<CompletionChoice>,
}

#[derive(Deserialize)]
struct CompletionChoice {
    text: String,
}

/// Shared entry point to all backends. Safe for concurrent use.
pub struct Gateway {
    client: reqwest::blocking::Client,
    api_key: Option<String>,
    mock_seed: u64,
    limiters: Mutex<HashMap<String, Arc<Limiter>>>,
    requests: AtomicUsize,
}

impl Gateway {
    pub fn new(mock_seed: u64) -> Self {
        Self {
            client: reqwest::blocking::Client::new(),
            api_key: None,
            mock_seed,
            limiters: Mutex::new(HashMap::new()),
            requests: AtomicUsize::new(0),
        }
    }

    pub fn with_api_key(mut self, key: Option<String>) -> Self {
        self.api_key = key;
        self
    }

    /// Number of backend requests issued so far, including retries and mock calls.
    pub fn request_count(&self) -> usize {
        self.requests.load(Ordering::Relaxed)
    }

    fn limiter(&self, cfg: &ModelConfig) -> Arc<Limiter> {
        let mut map = self.limiters.lock().expect("limiter map poisoned");
        map.entry(cfg.model_id.clone())
            .or_insert_with(|| Arc::new(Limiter::new(cfg.max_in_flight)))
            .clone()
    }

    /// Raw completion text for `prompt`. `query_text` is only read by the
    /// offline backend, which derives its keywords from it.
    pub fn generate_completion(&self, cfg: &ModelConfig, prompt: &str, query_text: &str) -> Result<String> {
        if cfg.is_mock() {
            self.requests.fetch_add(1, Ordering::Relaxed);
            let seed = self.mock_seed ^ stable_hash(cfg.model_id.as_bytes());
            return Ok(mock_generate(prompt, query_text, seed));
        }
        self.http_completion(cfg, prompt)
    }

    /// Asks `cfg` to rate how well `subject_label` fits `text`. Transport
    /// failures and unparseable replies are retried up to `max_retries` times,
    /// then reported as [`RankScore::Unscored`]. Only template errors fail.
    pub fn rank_relevance(
        &self,
        cfg: &ModelConfig,
        text: &str,
        subject_label: &str,
        rank_template: &str,
        scale_max: u8,
    ) -> Result<RankScore> {
        let prompt = assemble_rank_prompt(text, subject_label, rank_template)?;
        if cfg.is_mock() {
            self.requests.fetch_add(1, Ordering::Relaxed);
            return Ok(parse_rank_reply(&mock_rank(text, subject_label), scale_max));
        }
        for _ in 0..=cfg.max_retries {
            match self.http_completion(cfg, &prompt) {
                Ok(reply) => match parse_rank_reply(&reply, scale_max) {
                    RankScore::Unscored => log::debug!("unparseable rank reply {reply:?}"),
                    score => return Ok(score),
                },
                Err(e) => {
                    log::warn!("rank request for {subject_label:?} failed: {e}");
                    return Ok(RankScore::Unscored);
                }
            }
        }
        Ok(RankScore::Unscored)
    }

    fn http_completion(&self, cfg: &ModelConfig, prompt: &str) -> Result<String> {
        let limiter = self.limiter(cfg);
        let _permit = limiter.acquire();
        let url = completions_url(&cfg.endpoint);
        let body = CompletionRequest {
            model: &cfg.model_id,
            prompt,
            temperature: cfg.temperature,
            min_tokens: cfg.min_tokens,
            max_tokens: cfg.max_tokens,
        };
        let attempts = cfg.max_retries as usize + 1;
        let mut last = String::new();
        for attempt in 0..attempts {
            if attempt > 0 {
                let backoff = cfg.retry_backoff_ms.saturating_mul(1 << (attempt - 1).min(10));
                std::thread::sleep(Duration::from_millis(backoff));
            }
            self.requests.fetch_add(1, Ordering::Relaxed);
            match self.send_once(&url, cfg, &body) {
                Attempt::Done(text) => return Ok(text),
                Attempt::Fatal(e) => return Err(e),
                Attempt::Transient(msg) => {
                    log::debug!("{} attempt {} failed: {msg}", cfg.model_id, attempt + 1);
                    last = msg;
                }
            }
        }
        Err(Error::Transport {
            attempts,
            message: last,
        })
    }

    fn send_once(&self, url: &str, cfg: &ModelConfig, body: &CompletionRequest<'_>) -> Attempt {
        let mut req = self
            .client
            .post(url)
            .timeout(Duration::from_millis(cfg.request_timeout_ms))
            .json(body);
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = match req.send() {
            Ok(r) => r,
            Err(e) => return Attempt::Transient(e.to_string()),
        };
        let status = resp.status();
        if status.as_u16() == 429 || status.is_server_error() {
            return Attempt::Transient(format!("status {status}"));
        }
        if !status.is_success() {
            let body = resp.text().unwrap_or_default();
            return Attempt::Fatal(Error::BackendStatus {
                status: status.as_u16(),
                body,
            });
        }
        match resp.json::<CompletionResponse>() {
            Ok(parsed) => match parsed.choices.into_iter().next() {
                Some(choice) => Attempt::Done(choice.text),
                None => Attempt::Fatal(Error::BackendStatus {
                    status: status.as_u16(),
                    body: "response has no choices".into(),
                }),
            },
            Err(e) => Attempt::Transient(format!("malformed response: {e}")),
        }
    }
}

fn completions_url(endpoint: &str) -> String {
    let base = endpoint.trim_end_matches('/');
    if base.ends_with("/completions") {
        base.to_string()
    } else if base.ends_with("/v1") {
        format!("{base}/completions")
    } else {
        format!("{base}/v1/completions")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn keywords_basic() {
        assert_eq!(parse_keywords("Geschichte, Politik,  Kultur"), ["Geschichte", "Politik", "Kultur"]);
        assert_eq!(parse_keywords("- A\n- a\n- B"), ["A", "B"]);
        assert!(parse_keywords("").is_empty());
        assert_eq!(parse_keywords("1. Erster\n2) Zweiter; * Dritter"), ["Erster", "Zweiter", "Dritter"]);
        assert_eq!(parse_keywords("3.5-Zoll-Diskette"), ["3.5-Zoll-Diskette"]);
        let long = "x".repeat(200);
        assert_eq!(parse_keywords(&long)[0].chars().count(), MAX_KEYWORD_CHARS);
    }

    proptest! {
        #[test]
        fn keyword_parsing_is_idempotent(s in "[a-zA-Z0-9 ,;\\-\\*\\.\\)\n]{0,80}") {
            let once = parse_keywords(&s);
            let twice = parse_keywords(&once.join(", "));
            prop_assert_eq!(once, twice);
        }

        #[test]
        fn rank_always_in_range(s in "\\PC{0,30}") {
            match parse_rank_reply(&s, 10) {
                RankScore::Scored(v) => prop_assert!(v <= 10),
                RankScore::Unscored => {}
            }
        }
    }

    #[test]
    fn rank_replies() {
        assert_eq!(parse_rank_reply("7", 10), RankScore::Scored(7));
        assert_eq!(parse_rank_reply("Score: 10/10", 10), RankScore::Scored(10));
        assert_eq!(parse_rank_reply("very relevant", 10), RankScore::Unscored);
        assert_eq!(parse_rank_reply("42", 10), RankScore::Scored(10));
        assert_eq!(parse_rank_reply("-3", 10), RankScore::Scored(0));
        assert_eq!(parse_rank_reply("0", 10), RankScore::Scored(0));
        assert_eq!(RankScore::Scored(7).normalized(10, 0.5), 0.7);
        assert_eq!(RankScore::Unscored.normalized(10, 0.5), 0.5);
    }

    #[test]
    fn mock_generate_picks_longest_tokens() {
        let out = mock_generate("p", "solar energy storage systems", 1);
        let kws = parse_keywords(&out);
        assert!(kws.len() >= 3);
        assert_eq!(&kws[..2], ["storage", "systems"]);
        assert_eq!(out, mock_generate("p", "solar energy storage systems", 1));
        assert!(parse_keywords(&mock_generate("p", "", 1)).is_empty());
    }

    #[test]
    fn mock_count_within_bounds() {
        let text = "alpha bravo charlie delta echoes foxtrot golfing hotel indigo juliet kilos";
        for seed in 0..50 {
            let n = parse_keywords(&mock_generate("prompt", text, seed)).len();
            assert!((3..=8).contains(&n), "{n}");
        }
    }

    #[test]
    fn mock_rank_is_informative() {
        let text = "Landwirtschaft und Agrarpolitik in Europa";
        assert_eq!(mock_rank(text, "Landwirtschaft"), "10");
        let unrelated: u8 = mock_rank(text, "Quantenphysik").parse().unwrap();
        assert!(unrelated <= 2, "{unrelated}");
    }

    #[test]
    fn gateway_mock_is_deterministic() {
        let g = Gateway::new(3);
        let cfg = ModelConfig::mock("m");
        let a = g.generate_completion(&cfg, "prompt", "solar energy storage systems").unwrap();
        let b = Gateway::new(3)
            .generate_completion(&cfg, "prompt", "solar energy storage systems")
            .unwrap();
        assert_eq!(a, b);
        assert_eq!(g.request_count(), 1);
    }

    #[test]
    fn member_ids() {
        let m = EnsembleMember::new(ModelConfig::mock("llama"), "p03");
        assert_eq!(m.member_id, "llama×p03");
    }

    #[test]
    fn model_config_validation() {
        let mut cfg = ModelConfig::mock("m");
        cfg.validate().unwrap();
        cfg.min_tokens = 200;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn completion_urls() {
        assert_eq!(completions_url("http://h:8000"), "http://h:8000/v1/completions");
        assert_eq!(completions_url("http://h:8000/v1/"), "http://h:8000/v1/completions");
        assert_eq!(completions_url("http://h/v1/completions"), "http://h/v1/completions");
    }
}
