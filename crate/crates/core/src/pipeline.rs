//! Stage orchestration: complete → map → summarise → rank → combine, then
//! restriction to the target collection.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::Record;
use crate::error::{Error, Result};
use crate::jsonl;
use crate::llm::{parse_keywords, EnsembleMember, Gateway, ModelConfig};
use crate::mapping::{resolve_keywords, suggestions_from, Embedder, MappedSuggestion, MappingParams, VocabularyIndex};
use crate::prompting::{assemble_prompt, sample_examples, Prompt, PromptSpec, DEFAULT_RANK_TEMPLATE};
use crate::vocabulary::{filter_to_target, ConceptRef, Vocabulary};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleScore {
    pub doc_id: String,
    pub concept_id: String,
    pub s_ens: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedSuggestion {
    pub doc_id: String,
    pub concept_id: String,
    pub s_ens: f64,
    pub s_rel: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredSuggestion {
    pub doc_id: String,
    pub concept_id: String,
    pub s_ens: f64,
    pub s_rel: f64,
    pub s_fin: f64,
    pub rank: usize,
}

impl ConceptRef for ScoredSuggestion {
    fn concept_id(&self) -> &str {
        &self.concept_id
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CombineConfig {
    pub alpha: f64,
    /// Relevance assigned when the ranking model gave no usable score.
    pub rank_default: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_suggestions_per_doc: Option<usize>,
}

impl Default for CombineConfig {
    fn default() -> Self {
        Self {
            alpha: 0.3,
            rank_default: 0.5,
            max_suggestions_per_doc: None,
        }
    }
}

impl CombineConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::InvalidArgument(format!("alpha {} outside [0, 1]", self.alpha)));
        }
        if !(0.0..=1.0).contains(&self.rank_default) {
            return Err(Error::InvalidArgument(format!(
                "rank_default {} outside [0, 1]",
                self.rank_default
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RankConfig {
    pub model: ModelConfig,
    pub template: String,
    pub scale_max: u8,
}

impl Default for RankConfig {
    fn default() -> Self {
        Self {
            model: ModelConfig::mock("ranker"),
            template: DEFAULT_RANK_TEMPLATE.to_string(),
            scale_max: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub mapping: MappingParams,
    pub rank: RankConfig,
    pub combine: CombineConfig,
}

/// Few-shot prompts keyed by prompt id, plus the completion template.
#[derive(Debug, Clone)]
pub struct PromptBook {
    prompts: BTreeMap<String, Prompt>,
    template: String,
}

impl PromptBook {
    pub fn new(prompts: impl IntoIterator<Item = Prompt>, template: impl Into<String>) -> Self {
        Self {
            prompts: prompts.into_iter().map(|p| (p.spec.prompt_id.clone(), p)).collect(),
            template: template.into(),
        }
    }

    /// Samples the examples of every spec from `train`.
    pub fn build(specs: &[PromptSpec], train: &[Record], vocab: &Vocabulary, template: impl Into<String>) -> Result<Self> {
        let prompts = specs
            .iter()
            .map(|s| sample_examples(train, s, vocab))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::new(prompts, template))
    }

    pub fn get(&self, prompt_id: &str) -> Result<&Prompt> {
        self.prompts
            .get(prompt_id)
            .ok_or_else(|| Error::InvalidArgument(format!("no prompt with id {prompt_id:?}")))
    }

    pub fn prompts(&self) -> impl Iterator<Item = &Prompt> {
        self.prompts.values()
    }

    pub fn template(&self) -> &str {
        &self.template
    }

    pub fn assemble(&self, prompt_id: &str, query_text: &str) -> Result<String> {
        assemble_prompt(self.get(prompt_id)?, query_text, &self.template)
    }
}

/// One persisted completion outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRecord {
    pub doc_id: String,
    pub member_id: String,
    pub keywords: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CompleteOutput {
    /// member id → doc id → keywords, for successful pairs only.
    pub keywords: BTreeMap<String, BTreeMap<String, Vec<String>>>,
    pub failures: Vec<CompletionRecord>,
    /// Pairs generated in this call, as opposed to reused from the store.
    pub generated: usize,
}

impl CompleteOutput {
    pub fn total_pairs(&self) -> usize {
        self.keywords.values().map(BTreeMap::len).sum::<usize>() + self.failures.len()
    }
}

/// File name used for a member's completion store.
pub fn member_file_name(member_id: &str) -> String {
    let safe: String = member_id
        .chars()
        .map(|c| if c.is_alphanumeric() || "-_.×".contains(c) { c } else { '_' })
        .collect();
    format!("{safe}.jsonl")
}

/// Reads a completion store, dropping lines left broken by an interrupted
/// write and rewriting the file so later appends start on a clean line.
fn load_store(path: &Path) -> Result<Vec<CompletionRecord>> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    let mut broken = false;
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        match serde_json::from_str::<CompletionRecord>(line) {
            Ok(r) => out.push(r),
            Err(e) => {
                log::warn!("{}: dropping unreadable line: {e}", path.display());
                broken = true;
            }
        }
    }
    if broken || (!text.is_empty() && !text.ends_with('\n')) {
        jsonl::write_all(path, &out)?;
    }
    Ok(out)
}

/// Generates keywords for every (member, document) pair.
///
/// With `store_dir`, each outcome is appended to
/// `store_dir/<member file>` as soon as it is known and successful pairs
/// already present there are reused. Backend failures are recorded per pair;
/// only prompt and template problems abort.
pub fn run_complete_stage(
    docs: &[Record],
    members: &[EnsembleMember],
    gateway: &Gateway,
    prompts: &PromptBook,
    store_dir: Option<&Path>,
) -> Result<CompleteOutput> {
    if members.is_empty() {
        return Err(Error::InvalidArgument("ensemble has no members".into()));
    }
    let mut seen = BTreeSet::new();
    for m in members {
        if !seen.insert(m.member_id.as_str()) {
            return Err(Error::DuplicateId(m.member_id.clone()));
        }
        m.model.validate()?;
        prompts.get(&m.prompt_spec_id)?;
    }
    if let Some(dir) = store_dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }

    let mut done: HashMap<(String, String), Vec<String>> = HashMap::new();
    let mut appenders = HashMap::new();
    for m in members {
        if let Some(dir) = store_dir {
            let path: PathBuf = dir.join(member_file_name(&m.member_id));
            for r in load_store(&path)? {
                if r.error.is_none() && r.member_id == m.member_id {
                    done.insert((r.member_id, r.doc_id), r.keywords);
                }
            }
            appenders.insert(m.member_id.as_str(), jsonl::Appender::open(&path)?);
        }
    }

    let todo: Vec<(&EnsembleMember, &Record)> = members
        .iter()
        .flat_map(|m| docs.iter().map(move |d| (m, d)))
        .filter(|(m, d)| !done.contains_key(&(m.member_id.clone(), d.id.clone())))
        .collect();

    let fresh: Vec<CompletionRecord> = todo
        .par_iter()
        .map(|&(m, d)| {
            let text = d.text();
            let prompt = prompts.assemble(&m.prompt_spec_id, &text)?;
            let record = match gateway.generate_completion(&m.model, &prompt, &text) {
                Ok(reply) => CompletionRecord {
                    doc_id: d.id.clone(),
                    member_id: m.member_id.clone(),
                    keywords: parse_keywords(&reply),
                    error: None,
                },
                Err(e) => {
                    log::warn!("{} on {}: {e}", m.member_id, d.id);
                    CompletionRecord {
                        doc_id: d.id.clone(),
                        member_id: m.member_id.clone(),
                        keywords: Vec::new(),
                        error: Some(e.to_string()),
                    }
                }
            };
            if let Some(app) = appenders.get(m.member_id.as_str()) {
                app.append(&record)?;
            }
            Ok(record)
        })
        .collect::<Result<_>>()?;

    let mut out = CompleteOutput {
        generated: fresh.len(),
        ..CompleteOutput::default()
    };
    for m in members {
        out.keywords.entry(m.member_id.clone()).or_default();
    }
    for ((member, doc), kws) in done {
        out.keywords.entry(member).or_default().insert(doc, kws);
    }
    for r in fresh {
        if r.error.is_some() {
            out.failures.push(r);
        } else {
            out.keywords.entry(r.member_id).or_default().insert(r.doc_id, r.keywords);
        }
    }
    out.failures
        .sort_by(|a, b| a.member_id.cmp(&b.member_id).then(a.doc_id.cmp(&b.doc_id)));
    Ok(out)
}

/// Reads persisted completion stores without generating anything. A later
/// record for the same document replaces an earlier one.
pub fn read_complete_store(dir: &Path, members: &[EnsembleMember]) -> Result<CompleteOutput> {
    let mut out = CompleteOutput::default();
    for m in members {
        let path = dir.join(member_file_name(&m.member_id));
        if !path.exists() {
            return Err(Error::MissingPrerequisite {
                stage: "complete".into(),
                detail: format!("{} not found", path.display()),
            });
        }
        let mut latest: BTreeMap<String, CompletionRecord> = BTreeMap::new();
        for r in load_store(&path)? {
            latest.insert(r.doc_id.clone(), r);
        }
        let slot = out.keywords.entry(m.member_id.clone()).or_default();
        for (doc, r) in latest {
            if r.error.is_some() {
                out.failures.push(r);
            } else {
                slot.insert(doc, r.keywords);
            }
        }
    }
    Ok(out)
}

/// Maps every keyword of every member onto the vocabulary, document by
/// document in input order. Each distinct keyword is searched once.
pub fn run_map_stage(
    docs: &[Record],
    keywords: &BTreeMap<String, BTreeMap<String, Vec<String>>>,
    index: &VocabularyIndex,
    embedder: &Embedder,
    params: &MappingParams,
) -> Result<Vec<MappedSuggestion>> {
    let all = keywords.values().flat_map(|by_doc| by_doc.values().flatten().map(String::as_str));
    let resolved = resolve_keywords(index, embedder, all, params)?;
    let mut out = Vec::new();
    for d in docs {
        let pairs: Vec<(String, String)> = keywords
            .iter()
            .filter_map(|(member, by_doc)| by_doc.get(&d.id).map(|kws| (member, kws)))
            .flat_map(|(member, kws)| kws.iter().map(move |k| (k.clone(), member.clone())))
            .collect();
        out.extend(suggestions_from(&resolved, &d.id, &pairs));
    }
    Ok(out)
}

/// Per (document, concept): each member's best similarity, summed and
/// divided by the configured member count. Sorted by document, then concept.
pub fn summarise(mapped: &[MappedSuggestion], n_members: usize) -> Result<Vec<EnsembleScore>> {
    if n_members == 0 {
        return Err(Error::InvalidArgument("n_members must be at least 1".into()));
    }
    let observed: BTreeSet<&str> = mapped.iter().map(|m| m.member_id.as_str()).collect();
    if observed.len() > n_members {
        return Err(Error::InvalidArgument(format!(
            "{} distinct members observed but n_members is {n_members}",
            observed.len()
        )));
    }
    let mut best: BTreeMap<(&str, &str), BTreeMap<&str, f64>> = BTreeMap::new();
    for m in mapped {
        let slot = best
            .entry((m.doc_id.as_str(), m.concept_id.as_str()))
            .or_default()
            .entry(m.member_id.as_str())
            .or_insert(f64::NEG_INFINITY);
        *slot = slot.max(m.similarity);
    }
    Ok(best
        .into_iter()
        .map(|((doc, concept), per_member)| EnsembleScore {
            doc_id: doc.to_string(),
            concept_id: concept.to_string(),
            s_ens: per_member.values().sum::<f64>() / n_members as f64,
        })
        .collect())
}

/// Relevance scores for one document's suggestions; each concept is asked
/// for once.
pub fn rank_stage(
    doc_id: &str,
    doc_text: &str,
    suggestions: &[EnsembleScore],
    vocab: &Vocabulary,
    gateway: &Gateway,
    rank: &RankConfig,
    cfg: &CombineConfig,
) -> Result<Vec<RankedSuggestion>> {
    if let Some(s) = suggestions.iter().find(|s| s.doc_id != doc_id) {
        return Err(Error::InvalidArgument(format!(
            "suggestion for {:?} passed to the rank stage of {doc_id:?}",
            s.doc_id
        )));
    }
    let concepts: BTreeSet<&str> = suggestions.iter().map(|s| s.concept_id.as_str()).collect();
    let scores: HashMap<&str, f64> = concepts
        .into_par_iter()
        .map(|c| {
            let label = &vocab.require(c)?.pref_label;
            let score = gateway.rank_relevance(&rank.model, doc_text, label, &rank.template, rank.scale_max)?;
            Ok((c, score.normalized(rank.scale_max, cfg.rank_default)))
        })
        .collect::<Result<_>>()?;
    Ok(suggestions
        .iter()
        .map(|s| RankedSuggestion {
            doc_id: s.doc_id.clone(),
            concept_id: s.concept_id.clone(),
            s_ens: s.s_ens,
            s_rel: scores[s.concept_id.as_str()],
        })
        .collect())
}

/// Rank stage over a whole document set.
pub fn run_rank_stage(
    docs: &[Record],
    ensemble: &[EnsembleScore],
    vocab: &Vocabulary,
    gateway: &Gateway,
    rank: &RankConfig,
    cfg: &CombineConfig,
) -> Result<Vec<RankedSuggestion>> {
    let mut by_doc: BTreeMap<&str, Vec<EnsembleScore>> = BTreeMap::new();
    for e in ensemble {
        by_doc.entry(e.doc_id.as_str()).or_default().push(e.clone());
    }
    let texts: HashMap<&str, String> = docs.iter().map(|d| (d.id.as_str(), d.text())).collect();
    let ranked: Vec<Vec<RankedSuggestion>> = by_doc
        .into_par_iter()
        .map(|(doc, sugg)| {
            let text = texts
                .get(doc)
                .ok_or_else(|| Error::InvalidArgument(format!("no document text for {doc:?}")))?;
            rank_stage(doc, text, &sugg, vocab, gateway, rank, cfg)
        })
        .collect::<Result<_>>()?;
    Ok(ranked.into_iter().flatten().collect())
}

fn order(a: &ScoredSuggestion, b: &ScoredSuggestion) -> std::cmp::Ordering {
    b.s_fin
        .total_cmp(&a.s_fin)
        .then(b.s_ens.total_cmp(&a.s_ens))
        .then_with(|| a.concept_id.cmp(&b.concept_id))
}

fn rerank(by_doc: BTreeMap<String, Vec<ScoredSuggestion>>, max: Option<usize>) -> Vec<ScoredSuggestion> {
    let mut out = Vec::new();
    for (_, mut list) in by_doc {
        list.sort_by(order);
        if let Some(max) = max {
            list.truncate(max);
        }
        for (i, s) in list.iter_mut().enumerate() {
            s.rank = i + 1;
        }
        out.extend(list);
    }
    out
}

/// Final score per suggestion, ranked within each document.
pub fn combine(ranked: &[RankedSuggestion], cfg: &CombineConfig) -> Vec<ScoredSuggestion> {
    let mut by_doc: BTreeMap<String, Vec<ScoredSuggestion>> = BTreeMap::new();
    for r in ranked {
        by_doc.entry(r.doc_id.clone()).or_default().push(ScoredSuggestion {
            doc_id: r.doc_id.clone(),
            concept_id: r.concept_id.clone(),
            s_ens: r.s_ens,
            s_rel: r.s_rel,
            s_fin: cfg.alpha * r.s_ens + (1.0 - cfg.alpha) * r.s_rel,
            rank: 0,
        });
    }
    rerank(by_doc, cfg.max_suggestions_per_doc)
}

/// Drops concepts outside the target collection, then renumbers ranks and
/// applies the per-document cap.
pub fn finalize(scored: &[ScoredSuggestion], vocab: &Vocabulary, max: Option<usize>) -> Result<Vec<ScoredSuggestion>> {
    let kept = filter_to_target(scored, vocab)?;
    let mut by_doc: BTreeMap<String, Vec<ScoredSuggestion>> = BTreeMap::new();
    for s in kept {
        by_doc.entry(s.doc_id.clone()).or_default().push(s);
    }
    Ok(rerank(by_doc, max))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocSuggestions {
    pub doc_id: String,
    pub suggestions: Vec<ScoredSuggestion>,
}

/// Regroups flat suggestions per document, in `docs` order; documents without
/// suggestions get an empty list.
pub fn group_by_doc(docs: &[Record], scored: &[ScoredSuggestion]) -> Vec<DocSuggestions> {
    let mut by_doc: HashMap<&str, Vec<ScoredSuggestion>> = HashMap::new();
    for s in scored {
        by_doc.entry(s.doc_id.as_str()).or_default().push(s.clone());
    }
    docs.iter()
        .map(|d| DocSuggestions {
            doc_id: d.id.clone(),
            suggestions: by_doc.remove(d.id.as_str()).unwrap_or_default(),
        })
        .collect()
}

/// Every intermediate result of one pipeline run.
#[derive(Debug, Clone)]
pub struct PipelineRun {
    pub complete: CompleteOutput,
    pub mapped: Vec<MappedSuggestion>,
    pub ensemble: Vec<EnsembleScore>,
    pub ranked: Vec<RankedSuggestion>,
    pub documents: Vec<DocSuggestions>,
}

impl PipelineRun {
    pub fn suggestions(&self) -> Vec<ScoredSuggestion> {
        self.documents.iter().flat_map(|d| d.suggestions.iter().cloned()).collect()
    }
}

/// In-memory end-to-end run. The index is expected to cover the extended
/// vocabulary; filtering to the target collection happens after scoring.
#[allow(clippy::too_many_arguments)]
pub fn run_pipeline(
    docs: &[Record],
    members: &[EnsembleMember],
    prompts: &PromptBook,
    vocab: &Vocabulary,
    index: &VocabularyIndex,
    embedder: &Embedder,
    gateway: &Gateway,
    cfg: &PipelineConfig,
) -> Result<PipelineRun> {
    cfg.combine.validate()?;
    let complete = run_complete_stage(docs, members, gateway, prompts, None)?;
    let mapped = run_map_stage(docs, &complete.keywords, index, embedder, &cfg.mapping)?;
    let ensemble = summarise(&mapped, members.len())?;
    let ranked = run_rank_stage(docs, &ensemble, vocab, gateway, &cfg.rank, &cfg.combine)?;
    let unlimited = CombineConfig {
        max_suggestions_per_doc: None,
        ..cfg.combine
    };
    let combined = combine(&ranked, &unlimited);
    let kept = finalize(&combined, vocab, cfg.combine.max_suggestions_per_doc)?;
    Ok(PipelineRun {
        complete,
        mapped,
        ensemble,
        ranked,
        documents: group_by_doc(docs, &kept),
    })
}

/// Tab-separated export: `doc_id, rank, concept_id, s_fin`.
pub fn write_tsv(path: impl AsRef<Path>, scored: &[ScoredSuggestion]) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::from("doc_id\trank\tconcept_id\ts_fin\n");
    for s in scored {
        out.push_str(&format!("{}\t{}\t{}\t{}\n", s.doc_id, s.rank, s.concept_id, s.s_fin));
    }
    std::fs::File::create(path)
        .and_then(|mut f| f.write_all(out.as_bytes()))
        .map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Language, RecordType};
    use crate::prompting::standard_prompt_specs;
    use crate::vocabulary::Concept;

    fn mapped(doc: &str, member: &str, concept: &str, sim: f64) -> MappedSuggestion {
        MappedSuggestion {
            doc_id: doc.into(),
            member_id: member.into(),
            keyword: concept.into(),
            concept_id: concept.into(),
            similarity: sim,
        }
    }

    fn ranked(doc: &str, concept: &str, s_ens: f64, s_rel: f64) -> RankedSuggestion {
        RankedSuggestion {
            doc_id: doc.into(),
            concept_id: concept.into(),
            s_ens,
            s_rel,
        }
    }

    #[test]
    fn summarise_examples() {
        let s = summarise(&[mapped("d", "A", "c", 0.9), mapped("d", "B", "c", 0.7)], 4).unwrap();
        assert!((s[0].s_ens - 0.4).abs() < 1e-12);

        let s = summarise(&[mapped("d", "A", "c", 0.6), mapped("d", "A", "c", 0.8)], 2).unwrap();
        assert!((s[0].s_ens - 0.4).abs() < 1e-12);

        let all: Vec<_> = (0..3).map(|i| mapped("d", &format!("m{i}"), "c", 1.0)).collect();
        assert_eq!(summarise(&all, 3).unwrap()[0].s_ens, 1.0);
        assert!(summarise(&all, 2).is_err());
        assert!(summarise(&[], 0).is_err());
    }

    #[test]
    fn combine_examples() {
        let out = combine(&[ranked("d", "c", 0.5, 0.8)], &CombineConfig::default());
        assert!((out[0].s_fin - 0.71).abs() < 1e-12);
        assert_eq!(out[0].rank, 1);

        let r = [ranked("d", "a", 0.9, 0.1), ranked("d", "b", 0.2, 0.8), ranked("d", "c", 0.5, 0.5)];
        let ids = |alpha| -> Vec<String> {
            combine(&r, &CombineConfig { alpha, ..Default::default() })
                .into_iter()
                .map(|s| s.concept_id)
                .collect()
        };
        assert_eq!(ids(1.0), ["a", "c", "b"]);
        assert_eq!(ids(0.0), ["b", "c", "a"]);
    }

    #[test]
    fn combine_ties_and_truncation() {
        let r = [ranked("d", "b", 0.5, 0.5), ranked("d", "a", 0.5, 0.5), ranked("d", "c", 0.7, 0.5 - 0.2 * 0.3 / 0.7)];
        let out = combine(&r, &CombineConfig { alpha: 0.0, max_suggestions_per_doc: Some(2), ..Default::default() });
        assert_eq!(out.len(), 2);
        assert_eq!((out[0].concept_id.as_str(), out[0].rank), ("a", 1));
        assert_eq!((out[1].concept_id.as_str(), out[1].rank), ("b", 2));
    }

    #[test]
    fn finalize_renumbers() {
        let vocab = Vocabulary::from_concepts([
            Concept { id: "a".into(), pref_label: "A".into(), alt_labels: vec![], in_target_collection: false },
            Concept { id: "b".into(), pref_label: "B".into(), alt_labels: vec![], in_target_collection: true },
        ])
        .unwrap();
        let scored = combine(&[ranked("d", "a", 0.9, 0.9), ranked("d", "b", 0.1, 0.1)], &CombineConfig::default());
        let kept = finalize(&scored, &vocab, None).unwrap();
        assert_eq!(kept.len(), 1);
        assert_eq!((kept[0].concept_id.as_str(), kept[0].rank), ("b", 1));
    }

    #[test]
    fn rank_stage_normalizes_and_rejects_foreign_docs() {
        let vocab = Vocabulary::from_concepts([Concept {
            id: "c".into(),
            pref_label: "Solarenergie".into(),
            alt_labels: vec![],
            in_target_collection: true,
        }])
        .unwrap();
        let gw = Gateway::new(1);
        let e = [EnsembleScore { doc_id: "d".into(), concept_id: "c".into(), s_ens: 0.5 }];
        let r = rank_stage("d", "Solarenergie", &e, &vocab, &gw, &RankConfig::default(), &CombineConfig::default())
            .unwrap();
        assert_eq!(r[0].s_rel, 1.0);
        assert_eq!(gw.request_count(), 1);
        assert!(rank_stage("x", "t", &e, &vocab, &gw, &RankConfig::default(), &CombineConfig::default()).is_err());
    }

    fn record(id: &str, title: &str) -> Record {
        Record {
            id: id.into(),
            title: title.into(),
            abstract_text: String::new(),
            language: Language::De,
            record_type: RecordType::Article,
            gold_labels: None,
        }
    }

    #[test]
    fn complete_stage_resumes() {
        let spec = &standard_prompt_specs(0)[0];
        let prompt = Prompt { spec: spec.clone(), instruction: "Aufgabe".into(), examples: vec![] };
        let book = PromptBook::new([prompt], crate::prompting::DEFAULT_COMPLETE_TEMPLATE);
        let members: Vec<_> = ["m1", "m2"]
            .iter()
            .map(|m| EnsembleMember::new(ModelConfig::mock(*m), spec.prompt_id.clone()))
            .collect();
        let docs = vec![record("d1", "Windenergie Offshore Anlagen"), record("d2", "Bibliotheken Kataloge"), record("d3", "Moorlandschaften Klima")];
        let dir = tempfile::tempdir().unwrap();
        let gw = Gateway::new(3);
        let first = run_complete_stage(&docs, &members, &gw, &book, Some(dir.path())).unwrap();
        assert_eq!(first.generated, 6);
        assert_eq!(first.total_pairs(), 6);
        assert_eq!(gw.request_count(), 6);

        let again = run_complete_stage(&docs, &members, &gw, &book, Some(dir.path())).unwrap();
        assert_eq!(again.generated, 0);
        assert_eq!(again.keywords, first.keywords);
        assert_eq!(gw.request_count(), 6);

        assert!(run_complete_stage(&docs, &[], &gw, &book, None).is_err());
    }
}
