//! Okapi BM25 over short label documents.
//!
//! `score(q, d) = Σ_{t ∈ q} idf(t) · tf·(k1+1) / (tf + k1·(1 − b + b·|d|/avgdl))`
//! with `idf(t) = ln(1 + (N − df + 0.5) / (df + 0.5))`. Query terms are
//! deduplicated; tokens are lowercased alphanumeric runs.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::features::normalized_tokens;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Self { k1: 1.2, b: 0.75 }
    }
}

#[derive(Debug, Clone)]
pub struct Bm25Index {
    params: Bm25Params,
    postings: HashMap<String, Vec<(u32, u32)>>,
    doc_len: Vec<u32>,
    avgdl: f64,
}

impl Bm25Index {
    pub fn build<'a>(docs: impl IntoIterator<Item = &'a str>, params: Bm25Params) -> Self {
        let mut postings: HashMap<String, Vec<(u32, u32)>> = HashMap::new();
        let mut doc_len = Vec::new();
        for (id, doc) in docs.into_iter().enumerate() {
            let mut tf: HashMap<String, u32> = HashMap::new();
            let mut len = 0;
            for tok in normalized_tokens(doc) {
                *tf.entry(tok).or_default() += 1;
                len += 1;
            }
            doc_len.push(len);
            for (tok, n) in tf {
                postings.entry(tok).or_default().push((id as u32, n));
            }
        }
        let total: u64 = doc_len.iter().map(|&l| u64::from(l)).sum();
        let avgdl = if doc_len.is_empty() {
            0.0
        } else {
            total as f64 / doc_len.len() as f64
        };
        Self {
            params,
            postings,
            doc_len,
            avgdl,
        }
    }

    pub fn params(&self) -> Bm25Params {
        self.params
    }

    pub fn len(&self) -> usize {
        self.doc_len.len()
    }

    pub fn is_empty(&self) -> bool {
        self.doc_len.is_empty()
    }

    /// All documents with a positive score, best first, ties by id.
    pub fn scores(&self, query: &str) -> Vec<(usize, f64)> {
        let n = self.doc_len.len() as f64;
        let Bm25Params { k1, b } = self.params;
        let mut acc: HashMap<u32, f64> = HashMap::new();
        let terms: HashSet<String> = normalized_tokens(query).collect();
        let mut terms: Vec<String> = terms.into_iter().collect();
        // fixed summation order keeps scores bit-reproducible
        terms.sort();
        for term in &terms {
            let Some(list) = self.postings.get(term) else {
                continue;
            };
            let df = list.len() as f64;
            let idf = (1.0 + (n - df + 0.5) / (df + 0.5)).ln();
            for &(doc, tf) in list {
                let tf = f64::from(tf);
                let dl = f64::from(self.doc_len[doc as usize]);
                let norm = tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * dl / self.avgdl));
                *acc.entry(doc).or_default() += idf * norm;
            }
        }
        let mut out: Vec<(usize, f64)> = acc
            .into_iter()
            .filter(|(_, s)| *s > 0.0)
            .map(|(d, s)| (d as usize, s))
            .collect();
        out.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        out
    }

    pub fn top(&self, query: &str, n: usize) -> Vec<(usize, f64)> {
        let mut s = self.scores(query);
        s.truncate(n);
        s
    }
}
