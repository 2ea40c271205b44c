//! Document-averaged precision/recall at k, precision-recall curves over
//! confidence thresholds, and PR-AUC.
//!
//! Conventions:
//! * every document with a gold entry is evaluated; documents without
//!   predictions count as zero hits;
//! * `P@k = hits / k` by default (see [`PatkDenominator`]), `R@k = hits / |gold|`;
//! * `F1@k` is the harmonic mean of the document-averaged P@k and R@k;
//! * on a PR curve a document with no suggestion above the threshold
//!   contributes precision 0 and recall 0;
//! * PR-AUC is a right-continuous step integral over recall without
//!   interpolation: `Σ (R_i − R_{i−1}) · P_i` with `R_0 = 0`.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::Record;
use crate::error::{Error, Result};
use crate::pipeline::{RankedSuggestion, ScoredSuggestion};

/// Gold concept ids per document.
pub type Gold = BTreeMap<String, BTreeSet<String>>;

pub fn gold_from_records(records: &[Record]) -> Gold {
    records
        .iter()
        .filter_map(|r| {
            r.gold_labels
                .as_ref()
                .map(|g| (r.id.clone(), g.iter().cloned().collect()))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PatkDenominator {
    #[default]
    K,
    /// `min(k, number of predictions)`; a document without predictions scores 0.
    MinKN,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupBy {
    Language,
    RecordType,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtK {
    pub p_at: BTreeMap<usize, f64>,
    pub r_at: BTreeMap<usize, f64>,
    pub f1_at: BTreeMap<usize, f64>,
    pub n_docs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub p_at: BTreeMap<usize, f64>,
    pub r_at: BTreeMap<usize, f64>,
    pub f1_at: BTreeMap<usize, f64>,
    pub pr_auc: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub group_by: Option<GroupBy>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub group: Option<String>,
    pub n_docs: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrPoint {
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
}

/// Points ordered by threshold, highest first.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PrCurve {
    pub points: Vec<PrPoint>,
}

pub(crate) fn harmonic(p: f64, r: f64) -> f64 {
    if p + r > 0.0 {
        2.0 * p * r / (p + r)
    } else {
        0.0
    }
}

fn check_gold<'a>(gold: &'a Gold, doc: &str) -> Result<&'a BTreeSet<String>> {
    let g = gold.get(doc).ok_or_else(|| Error::MissingGold(doc.to_string()))?;
    if g.is_empty() {
        return Err(Error::InvalidArgument(format!("document {doc:?} has an empty gold set")));
    }
    Ok(g)
}

/// P@k, R@k and F1@k averaged over all documents in `gold`.
pub fn metrics_at_k(
    predictions: &BTreeMap<String, Vec<String>>,
    gold: &Gold,
    ks: &[usize],
    denominator: PatkDenominator,
) -> Result<AtK> {
    for doc in predictions.keys() {
        check_gold(gold, doc)?;
    }
    let empty = Vec::new();
    let mut p_sum = vec![0.0; ks.len()];
    let mut r_sum = vec![0.0; ks.len()];
    for (doc, g) in gold {
        check_gold(gold, doc)?;
        let preds = predictions.get(doc).unwrap_or(&empty);
        for (i, &k) in ks.iter().enumerate() {
            let hits = preds.iter().take(k).filter(|c| g.contains(*c)).count() as f64;
            let denom = match denominator {
                PatkDenominator::K => k,
                PatkDenominator::MinKN => k.min(preds.len()),
            };
            if denom > 0 {
                p_sum[i] += hits / denom as f64;
            }
            r_sum[i] += hits / g.len() as f64;
        }
    }
    let n = gold.len();
    let mut out = AtK {
        p_at: BTreeMap::new(),
        r_at: BTreeMap::new(),
        f1_at: BTreeMap::new(),
        n_docs: n,
    };
    for (i, &k) in ks.iter().enumerate() {
        let (p, r) = if n == 0 {
            (0.0, 0.0)
        } else {
            (p_sum[i] / n as f64, r_sum[i] / n as f64)
        };
        out.p_at.insert(k, p);
        out.r_at.insert(k, r);
        out.f1_at.insert(k, harmonic(p, r));
    }
    Ok(out)
}

/// PR curve from `(doc, concept, score)` triples. Thresholds are the distinct
/// scores, descending. Each `(doc, concept)` pair should appear once.
pub fn pr_curve_from_scores<'a>(
    items: impl IntoIterator<Item = (&'a str, &'a str, f64)>,
    gold: &Gold,
) -> Result<PrCurve> {
    let mut items: Vec<(&str, &str, f64)> = items.into_iter().collect();
    for (doc, _, _) in &items {
        check_gold(gold, doc)?;
    }
    for doc in gold.keys() {
        check_gold(gold, doc)?;
    }
    items.sort_by(|a, b| b.2.total_cmp(&a.2).then(a.0.cmp(b.0)).then(a.1.cmp(b.1)));

    let n_docs = gold.len() as f64;
    let mut state: HashMap<&str, (usize, usize)> = HashMap::new();
    let (mut p_sum, mut r_sum) = (0.0_f64, 0.0_f64);
    let mut points = Vec::new();
    let mut i = 0;
    while i < items.len() {
        let t = items[i].2;
        while i < items.len() && items[i].2 == t {
            let (doc, concept, _) = items[i];
            let g = gold[doc].len() as f64;
            let (kept, hits) = state.entry(doc).or_insert((0, 0));
            if *kept > 0 {
                p_sum -= *hits as f64 / *kept as f64;
            }
            r_sum -= *hits as f64 / g;
            *kept += 1;
            if gold[doc].contains(concept) {
                *hits += 1;
            }
            p_sum += *hits as f64 / *kept as f64;
            r_sum += *hits as f64 / g;
            i += 1;
        }
        points.push(PrPoint {
            threshold: t,
            precision: p_sum / n_docs,
            recall: r_sum / n_docs,
        });
    }
    Ok(PrCurve { points })
}

pub fn pr_curve(suggestions: &[ScoredSuggestion], gold: &Gold) -> Result<PrCurve> {
    pr_curve_from_scores(
        suggestions
            .iter()
            .map(|s| (s.doc_id.as_str(), s.concept_id.as_str(), s.s_fin)),
        gold,
    )
}

pub fn pr_auc(curve: &PrCurve) -> f64 {
    let mut prev = 0.0;
    let mut area = 0.0;
    for p in &curve.points {
        area += (p.recall - prev) * p.precision;
        prev = p.recall;
    }
    area
}

/// PR-AUC of `α · s_ens + (1 − α) · s_rel` for each α, from cached scores.
pub fn alpha_sweep(ranked: &[RankedSuggestion], gold: &Gold, alphas: &[f64]) -> Result<Vec<(f64, f64)>> {
    alphas
        .iter()
        .map(|&alpha| {
            let curve = pr_curve_from_scores(
                ranked.iter().map(|r| {
                    (
                        r.doc_id.as_str(),
                        r.concept_id.as_str(),
                        alpha * r.s_ens + (1.0 - alpha) * r.s_rel,
                    )
                }),
                gold,
            )?;
            Ok((alpha, pr_auc(&curve)))
        })
        .collect()
}

/// Ranked concept ids per document, following each suggestion's `rank`.
pub fn ranked_predictions(suggestions: &[ScoredSuggestion]) -> BTreeMap<String, Vec<String>> {
    let mut by_doc: BTreeMap<String, Vec<&ScoredSuggestion>> = BTreeMap::new();
    for s in suggestions {
        by_doc.entry(s.doc_id.clone()).or_default().push(s);
    }
    by_doc
        .into_iter()
        .map(|(doc, mut v)| {
            v.sort_by_key(|s| s.rank);
            (doc, v.into_iter().map(|s| s.concept_id.clone()).collect())
        })
        .collect()
}

/// Full report over final suggestions.
pub fn evaluate(
    suggestions: &[ScoredSuggestion],
    gold: &Gold,
    ks: &[usize],
    denominator: PatkDenominator,
) -> Result<MetricsReport> {
    let at_k = metrics_at_k(&ranked_predictions(suggestions), gold, ks, denominator)?;
    let pr_auc = pr_auc(&pr_curve(suggestions, gold)?);
    Ok(MetricsReport {
        p_at: at_k.p_at,
        r_at: at_k.r_at,
        f1_at: at_k.f1_at,
        pr_auc,
        group_by: None,
        group: None,
        n_docs: at_k.n_docs,
    })
}

/// One report per language or record type. Groups partition the gold
/// documents, so `Σ n_g · P_g / n` recomposes the overall averages.
pub fn evaluate_grouped(
    suggestions: &[ScoredSuggestion],
    gold: &Gold,
    records: &[Record],
    ks: &[usize],
    denominator: PatkDenominator,
    group_by: GroupBy,
) -> Result<BTreeMap<String, MetricsReport>> {
    let key_of: HashMap<&str, String> = records
        .iter()
        .map(|r| {
            let key = match group_by {
                GroupBy::Language => r.language.to_string(),
                GroupBy::RecordType => r.record_type.to_string(),
            };
            (r.id.as_str(), key)
        })
        .collect();
    let mut group_gold: BTreeMap<String, Gold> = BTreeMap::new();
    for (doc, g) in gold {
        let key = key_of
            .get(doc.as_str())
            .ok_or_else(|| Error::InvalidArgument(format!("no record metadata for document {doc:?}")))?;
        group_gold.entry(key.clone()).or_default().insert(doc.clone(), g.clone());
    }
    let mut out = BTreeMap::new();
    for (key, g) in group_gold {
        let subset: Vec<ScoredSuggestion> = suggestions
            .iter()
            .filter(|s| g.contains_key(&s.doc_id))
            .cloned()
            .collect();
        let mut report = evaluate(&subset, &g, ks, denominator)?;
        report.group_by = Some(group_by);
        report.group = Some(key.clone());
        out.insert(key, report);
    }
    Ok(out)
}

pub fn write_curve_csv(path: impl AsRef<Path>, curve: &PrCurve) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::from("threshold,precision,recall\n");
    for p in &curve.points {
        out.push_str(&format!("{},{},{}\n", p.threshold, p.precision, p.recall));
    }
    std::fs::File::create(path)
        .and_then(|mut f| f.write_all(out.as_bytes()))
        .map_err(|e| Error::io(path, e))
}
