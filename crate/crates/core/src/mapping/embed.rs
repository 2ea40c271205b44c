use std::time::Duration;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{char_trigrams, stable_hash};

pub const MIN_DIMENSION: usize = 8;
const HTTP_BATCH: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbedderKind {
    HttpService,
    HashedFeatures,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbedderConfig {
    pub kind: EmbedderKind,
    pub dimension: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
    pub request_timeout_ms: u64,
}

impl Default for EmbedderConfig {
    fn default() -> Self {
        Self {
            kind: EmbedderKind::HashedFeatures,
            dimension: 512,
            endpoint: None,
            request_timeout_ms: 60_000,
        }
    }
}

/// Text embedder producing L2-normalized vectors.
///
/// `HashedFeatures` hashes character 3-grams into `dimension` buckets and
/// normalizes; it needs no model and is fully deterministic. `HttpService`
/// posts `{"inputs": [...]}` to a text-embeddings server and expects one
/// vector per input.
pub struct Embedder {
    config: EmbedderConfig,
    client: Option<reqwest::blocking::Client>,
}

impl Embedder {
    pub fn new(config: EmbedderConfig) -> Result<Self> {
        if config.dimension < MIN_DIMENSION {
            return Err(Error::InvalidArgument(format!(
                "embedding dimension must be at least {MIN_DIMENSION}, got {}",
                config.dimension
            )));
        }
        let client = match config.kind {
            EmbedderKind::HashedFeatures => None,
            EmbedderKind::HttpService => {
                if config.endpoint.is_none() {
                    return Err(Error::InvalidArgument("http embedder needs an endpoint".into()));
                }
                Some(reqwest::blocking::Client::new())
            }
        };
        Ok(Self { config, client })
    }

    pub fn hashed(dimension: usize) -> Result<Self> {
        Self::new(EmbedderConfig {
            dimension,
            ..EmbedderConfig::default()
        })
    }

    pub fn dimension(&self) -> usize {
        self.config.dimension
    }

    pub fn config(&self) -> &EmbedderConfig {
        &self.config
    }

    pub fn embed(&self, text: &str) -> Result<Vec<f32>> {
        Ok(self.embed_batch(&[text])?.remove(0))
    }

    pub fn embed_batch(&self, texts: &[&str]) -> Result<Vec<Vec<f32>>> {
        if let Some(t) = texts.iter().find(|t| t.trim().is_empty()) {
            return Err(Error::Embedding {
                text: t.to_string(),
                message: "empty text".into(),
            });
        }
        match self.config.kind {
            EmbedderKind::HashedFeatures => Ok(texts
                .par_iter()
                .map(|t| hashed_features(t, self.config.dimension))
                .collect()),
            EmbedderKind::HttpService => {
                let mut out = Vec::with_capacity(texts.len());
                for chunk in texts.chunks(HTTP_BATCH) {
                    out.extend(self.http_batch(chunk)?);
                }
                Ok(out)
            }
        }
    }

    fn http_batch(&self, texts: &[&str]) -> Result<Vec<Vec<f32>>> {
        let fail = |message: String| Error::Embedding {
            text: texts[0].to_string(),
            message,
        };
        let client = self.client.as_ref().expect("http embedder has a client");
        let endpoint = self.config.endpoint.as_deref().unwrap_or_default();
        let resp = client
            .post(endpoint)
            .timeout(Duration::from_millis(self.config.request_timeout_ms))
            .json(&serde_json::json!({ "inputs": texts }))
            .send()
            .map_err(|e| fail(e.to_string()))?;
        if !resp.status().is_success() {
            return Err(fail(format!("status {}", resp.status())));
        }
        let vectors: Vec<Vec<f32>> = resp.json().map_err(|e| fail(e.to_string()))?;
        if vectors.len() != texts.len() {
            return Err(fail(format!("expected {} vectors, got {}", texts.len(), vectors.len())));
        }
        vectors
            .into_iter()
            .zip(texts)
            .map(|(mut v, t)| {
                if v.len() != self.config.dimension {
                    return Err(Error::Embedding {
                        text: t.to_string(),
                        message: format!("dimension {} != configured {}", v.len(), self.config.dimension),
                    });
                }
                if !normalize(&mut v) {
                    return Err(Error::Embedding {
                        text: t.to_string(),
                        message: "zero vector".into(),
                    });
                }
                Ok(v)
            })
            .collect()
    }
}

fn hashed_features(text: &str, dimension: usize) -> Vec<f32> {
    let mut v = vec![0f32; dimension];
    for gram in char_trigrams(text) {
        v[(stable_hash(gram.as_bytes()) % dimension as u64) as usize] += 1.0;
    }
    normalize(&mut v);
    v
}

/// Scales to unit length; returns false for the zero vector.
pub fn normalize(v: &mut [f32]) -> bool {
    let norm = v.iter().map(|x| f64::from(*x) * f64::from(*x)).sum::<f64>().sqrt();
    if norm == 0.0 {
        return false;
    }
    for x in v.iter_mut() {
        *x = (f64::from(*x) / norm) as f32;
    }
    true
}

/// Dot product with f64 accumulation; the cosine for unit vectors.
pub fn cosine(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(x, y)| f64::from(*x) * f64::from(*y)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn norm(v: &[f32]) -> f64 {
        cosine(v, v).sqrt()
    }

    #[test]
    fn hashed_vectors_are_unit_and_deterministic() {
        let e = Embedder::hashed(64).unwrap();
        for t in ["a", "Landwirtschaft", "solar energy storage systems", "Ärger über Öl"] {
            let v = e.embed(t).unwrap();
            assert_eq!(v.len(), 64);
            assert!((norm(&v) - 1.0).abs() < 1e-6);
            assert_eq!(v, e.embed(t).unwrap());
        }
    }

    #[test]
    fn distinct_inputs_differ() {
        let e = Embedder::hashed(256).unwrap();
        let c = cosine(&e.embed("abc").unwrap(), &e.embed("abd").unwrap());
        assert!(c < 1.0);
    }

    #[test]
    fn rejects_empty_text_and_small_dimension() {
        let e = Embedder::hashed(16).unwrap();
        assert!(matches!(e.embed("   "), Err(Error::Embedding { .. })));
        assert!(Embedder::hashed(4).is_err());
        let http = EmbedderConfig {
            kind: EmbedderKind::HttpService,
            ..EmbedderConfig::default()
        };
        assert!(Embedder::new(http).is_err());
    }
}
