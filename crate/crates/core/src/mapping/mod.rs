//! Mapping free keywords onto vocabulary concepts.
//!
//! Every label of every concept (preferred and alternative) becomes one index
//! entry resolving to its concept. Queries run a dense HNSW branch and a BM25
//! branch, min-max normalize each branch over its own candidate pool and fuse
//! them as `w · vec + (1 − w) · bm25`.

pub mod bm25;
pub mod embed;
pub mod hnsw;
mod snapshot;

use std::cmp::Ordering;
use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use bm25::{Bm25Index, Bm25Params};
pub use embed::{cosine, Embedder, EmbedderConfig, EmbedderKind};
pub use hnsw::{Hnsw, HnswParams};

use crate::error::{Error, Result};
use crate::vocabulary::{ConceptRef, Vocabulary};

/// Candidates per branch relative to the requested result count.
pub const CANDIDATE_FACTOR: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IndexParams {
    pub hnsw: HnswParams,
    pub bm25: Bm25Params,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MappingParams {
    /// Weight of the vector branch in hybrid fusion, in `[0, 1]`.
    pub hybrid_weight: f64,
    /// Minimum cosine similarity for a keyword to be kept.
    pub threshold: f64,
}

impl Default for MappingParams {
    fn default() -> Self {
        Self {
            hybrid_weight: 0.75,
            threshold: 0.6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub label: String,
    pub concept_id: String,
}

pub struct VocabularyIndex {
    entries: Vec<IndexEntry>,
    graph: Hnsw,
    lexical: Bm25Index,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchHit {
    pub concept_id: String,
    pub fused_score: f64,
    pub cosine_sim: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MappedSuggestion {
    pub doc_id: String,
    pub member_id: String,
    pub keyword: String,
    pub concept_id: String,
    pub similarity: f64,
}

impl ConceptRef for MappedSuggestion {
    fn concept_id(&self) -> &str {
        &self.concept_id
    }
}

/// Embeds every concept label and builds both search structures.
pub fn build_index(vocab: &Vocabulary, embedder: &Embedder, params: IndexParams) -> Result<VocabularyIndex> {
    if vocab.is_empty() {
        return Err(Error::InvalidArgument("cannot index an empty vocabulary".into()));
    }
    let entries: Vec<IndexEntry> = vocab
        .concepts()
        .iter()
        .flat_map(|c| {
            c.labels().map(|l| IndexEntry {
                label: l.to_string(),
                concept_id: c.id.clone(),
            })
        })
        .collect();
    let labels: Vec<&str> = entries.iter().map(|e| e.label.as_str()).collect();
    let vectors = embedder.embed_batch(&labels)?;
    let dim = embedder.dimension();
    let flat: Vec<f32> = vectors.into_iter().flatten().collect();
    Ok(VocabularyIndex::assemble(entries, Hnsw::build(dim, params.hnsw, flat), params.bm25))
}

impl VocabularyIndex {
    fn assemble(entries: Vec<IndexEntry>, graph: Hnsw, bm25: Bm25Params) -> Self {
        let lexical = Bm25Index::build(entries.iter().map(|e| e.label.as_str()), bm25);
        Self {
            entries,
            graph,
            lexical,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[IndexEntry] {
        &self.entries
    }

    pub fn dimension(&self) -> usize {
        self.graph.dim()
    }

    pub fn params(&self) -> IndexParams {
        IndexParams {
            hnsw: *self.graph.params(),
            bm25: self.lexical.params(),
        }
    }

    pub fn vector(&self, entry: usize) -> &[f32] {
        self.graph.vector(entry)
    }

    /// Nearest entries by approximate vector search, as `(entry, cosine)`.
    pub fn vector_candidates(&self, query: &[f32], n: usize) -> Vec<(usize, f64)> {
        let ef = self.graph.params().ef_search.max(n);
        self.graph
            .search(query, n, ef)
            .into_iter()
            .map(|(i, _)| (i, cosine(query, self.vector(i))))
            .collect()
    }

    pub fn lexical_candidates(&self, query_text: &str, n: usize) -> Vec<(usize, f64)> {
        self.lexical.top(query_text, n)
    }

    /// Hybrid top-`top_n` concepts for one query. A branch whose weight is
    /// zero is not queried. Results are ordered by fused score, then concept id.
    pub fn hybrid_search(&self, query_vector: &[f32], query_text: &str, w: f64, top_n: usize) -> Vec<SearchHit> {
        let top_n = top_n.max(1);
        let pool = CANDIDATE_FACTOR * top_n;
        let vec_hits = if w > 0.0 {
            self.vector_candidates(query_vector, pool)
        } else {
            Vec::new()
        };
        let lex_hits = if w < 1.0 {
            self.lexical_candidates(query_text, pool)
        } else {
            Vec::new()
        };

        let mut fused: HashMap<usize, f64> = HashMap::new();
        for (entry, score) in min_max(&vec_hits) {
            *fused.entry(entry).or_default() += w * score;
        }
        for (entry, score) in min_max(&lex_hits) {
            *fused.entry(entry).or_default() += (1.0 - w) * score;
        }

        let mut best: HashMap<&str, SearchHit> = HashMap::new();
        for (entry, score) in fused {
            let concept = self.entries[entry].concept_id.as_str();
            let cos = cosine(query_vector, self.vector(entry));
            let better = best.get(concept).is_none_or(|h| {
                score.total_cmp(&h.fused_score).then(cos.total_cmp(&h.cosine_sim)) == Ordering::Greater
            });
            if better {
                best.insert(
                    concept,
                    SearchHit {
                        concept_id: concept.to_string(),
                        fused_score: score,
                        cosine_sim: cos,
                    },
                );
            }
        }
        let mut hits: Vec<SearchHit> = best.into_values().collect();
        hits.sort_by(|a, b| {
            b.fused_score
                .total_cmp(&a.fused_score)
                .then_with(|| a.concept_id.cmp(&b.concept_id))
        });
        hits.truncate(top_n);
        hits
    }
}

/// Min-max normalization over a candidate pool; a flat pool maps to 1.
fn min_max(hits: &[(usize, f64)]) -> Vec<(usize, f64)> {
    let (lo, hi) = hits
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &(_, s)| (lo.min(s), hi.max(s)));
    hits.iter()
        .map(|&(e, s)| {
            let norm = if hi > lo { (s - lo) / (hi - lo) } else { 1.0 };
            (e, norm)
        })
        .collect()
}

/// Best concept and clamped cosine per distinct keyword; `None` when the
/// keyword has no hit or falls below `params.threshold`. Keys are trimmed
/// keywords, blank ones are skipped.
pub fn resolve_keywords<'a>(
    index: &VocabularyIndex,
    embedder: &Embedder,
    keywords: impl IntoIterator<Item = &'a str>,
    params: &MappingParams,
) -> Result<HashMap<String, Option<(String, f64)>>> {
    let mut unique: Vec<&str> = keywords.into_iter().map(str::trim).filter(|k| !k.is_empty()).collect();
    unique.sort_unstable();
    unique.dedup();
    if unique.is_empty() {
        return Ok(HashMap::new());
    }
    let vectors = embedder.embed_batch(&unique)?;
    Ok(unique
        .into_par_iter()
        .zip(vectors)
        .map(|(keyword, vector)| {
            let hit = index
                .hybrid_search(&vector, keyword, params.hybrid_weight, 1)
                .into_iter()
                .next()
                .map(|h| (h.concept_id, h.cosine_sim.clamp(0.0, 1.0)))
                .filter(|(_, sim)| *sim >= params.threshold);
            (keyword.to_string(), hit)
        })
        .collect())
}

/// Suggestions for `(keyword, member_id)` pairs from resolved keywords.
pub fn suggestions_from(
    resolved: &HashMap<String, Option<(String, f64)>>,
    doc_id: &str,
    keywords: &[(String, String)],
) -> Vec<MappedSuggestion> {
    keywords
        .iter()
        .filter_map(|(keyword, member_id)| {
            let (concept_id, similarity) = resolved.get(keyword.trim())?.as_ref()?;
            Some(MappedSuggestion {
                doc_id: doc_id.to_string(),
                member_id: member_id.clone(),
                keyword: keyword.clone(),
                concept_id: concept_id.clone(),
                similarity: *similarity,
            })
        })
        .collect()
}

/// Maps each keyword to its top hybrid hit. Keywords that are blank, have no
/// hit, or whose clamped cosine falls below `params.threshold` are dropped.
pub fn map_keywords(
    index: &VocabularyIndex,
    embedder: &Embedder,
    doc_id: &str,
    keywords: &[(String, String)],
    params: &MappingParams,
) -> Result<Vec<MappedSuggestion>> {
    let resolved = resolve_keywords(index, embedder, keywords.iter().map(|(k, _)| k.as_str()), params)?;
    Ok(suggestions_from(&resolved, doc_id, keywords))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vocabulary::Concept;

    fn vocab() -> Vocabulary {
        let c = |id: &str, label: &str, alts: &[&str]| Concept {
            id: id.into(),
            pref_label: label.into(),
            alt_labels: alts.iter().map(|s| s.to_string()).collect(),
            in_target_collection: true,
        };
        Vocabulary::from_concepts([
            c("c1", "Landwirtschaft", &["Agriculture", "Farming"]),
            c("c2", "Agrarpolitik", &[]),
            c("c3", "Solarenergie", &[]),
        ])
        .unwrap()
    }

    #[test]
    fn one_entry_per_label() {
        let e = Embedder::hashed(64).unwrap();
        let idx = build_index(&vocab(), &e, IndexParams::default()).unwrap();
        assert_eq!(idx.len(), 5);
        assert_eq!(idx.entries()[1].concept_id, "c1");
    }

    #[test]
    fn self_match_and_thresholds() {
        let e = Embedder::hashed(128).unwrap();
        let idx = build_index(&vocab(), &e, IndexParams::default()).unwrap();
        let kws = vec![
            ("Agrarpolitik".to_string(), "m".to_string()),
            ("Farming".to_string(), "m".to_string()),
            ("  ".to_string(), "m".to_string()),
        ];
        let params = MappingParams::default();
        let mapped = map_keywords(&idx, &e, "d", &kws, &params).unwrap();
        assert_eq!(mapped[0].concept_id, "c2");
        assert!((mapped[0].similarity - 1.0).abs() < 1e-6);
        assert_eq!(mapped[1].concept_id, "c1");

        let none = map_keywords(&idx, &e, "d", &kws, &MappingParams { threshold: 1.1, ..params }).unwrap();
        assert!(none.is_empty());
        let all = map_keywords(&idx, &e, "d", &kws, &MappingParams { threshold: 0.0, ..params }).unwrap();
        assert_eq!(all.len(), 2);
        assert!(map_keywords(&idx, &e, "d", &[], &params).unwrap().is_empty());
    }

    #[test]
    fn min_max_flat_pool() {
        assert_eq!(min_max(&[(0, 0.3), (1, 0.3)]), vec![(0, 1.0), (1, 1.0)]);
        assert_eq!(min_max(&[(0, 2.0), (1, 1.0), (2, 0.0)]), vec![(0, 1.0), (1, 0.5), (2, 0.0)]);
    }
}
