//! Batch commands over a run directory.
//!
//! Each configuration gets its own directory `<run_dir>/<config hash>/`:
//!
//! ```text
//! config.toml            canonical form of the configuration
//! docs.jsonl, train.jsonl
//! index.bin              vocabulary index snapshot
//! prompts.json           sampled few-shot prompts
//! complete/<member>.jsonl
//! mapped.jsonl, summarised.jsonl, ranked.jsonl
//! final.jsonl, final.tsv
//! report.json, sweep.json, optimize.json
//! ```
//!
//! Every artifact has a `<name>.meta` sidecar recording the producing stage
//! and config hash.

pub mod config;
mod run_dir;

use std::collections::BTreeSet;
use std::path::PathBuf;

use serde::Serialize;
use serde_json::{json, Value};

pub use config::{load_config, validate_config, RunConfig};
pub use run_dir::RunDir;

use crate::corpus::{load_records, strata, stratified_disjoint_split, write_records, Record};
use crate::ensemble_opt::{optimize, CachedEnsemble, OptimizeConfig};
use crate::error::{Error, Result};
use crate::evaluation::{
    alpha_sweep, evaluate, evaluate_grouped, gold_from_records, pr_curve, write_curve_csv, Gold, GroupBy,
};
use crate::jsonl;
use crate::llm::{EnsembleMember, Gateway};
use crate::mapping::{build_index, Embedder, MappedSuggestion, VocabularyIndex};
use crate::pipeline::{
    combine, finalize, read_complete_store, run_complete_stage, run_map_stage, run_rank_stage, summarise,
    write_tsv, CombineConfig, EnsembleScore, PromptBook, RankedSuggestion, ScoredSuggestion,
};
use crate::vocabulary::{load_vocabulary, Vocabulary};

pub const DOCS: &str = "docs.jsonl";
pub const TRAIN: &str = "train.jsonl";
pub const INDEX: &str = "index.bin";
pub const PROMPTS: &str = "prompts.json";
pub const COMPLETE: &str = "complete";
pub const MAPPED: &str = "mapped.jsonl";
pub const SUMMARISED: &str = "summarised.jsonl";
pub const RANKED: &str = "ranked.jsonl";
pub const FINAL: &str = "final.jsonl";
pub const FINAL_TSV: &str = "final.tsv";
pub const REPORT: &str = "report.json";
pub const SWEEP: &str = "sweep.json";
pub const OPTIMIZE: &str = "optimize.json";

#[derive(Debug, Clone, PartialEq)]
pub enum Command {
    Ingest,
    BuildIndex,
    Complete,
    Map,
    Summarise,
    Rank,
    Combine,
    Run,
    Optimize {
        gold: Option<PathBuf>,
    },
    Evaluate {
        gold: Option<PathBuf>,
        group_by: Option<GroupBy>,
        curve: Option<PathBuf>,
    },
    SweepAlpha {
        gold: Option<PathBuf>,
    },
    VocabStats,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Ingest => "ingest",
            Command::BuildIndex => "build-index",
            Command::Complete => "complete",
            Command::Map => "map",
            Command::Summarise => "summarise",
            Command::Rank => "rank",
            Command::Combine => "combine",
            Command::Run => "run",
            Command::Optimize { .. } => "optimize",
            Command::Evaluate { .. } => "evaluate",
            Command::SweepAlpha { .. } => "sweep-alpha",
            Command::VocabStats => "vocab-stats",
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct ExecOptions {
    /// Accept artifacts recorded under a different config hash.
    pub force: bool,
    pub api_key: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Outcome {
    pub command: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub run_dir: Option<PathBuf>,
    pub llm_requests: usize,
    pub summary: Value,
}

/// Process exit status for an error: 1 validation, 2 missing prerequisite,
/// 3 backend failure.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::MissingPrerequisite { .. } | Error::MissingCache(_) => 2,
        Error::Transport { .. } | Error::BackendStatus { .. } | Error::BackendUnavailable(_) | Error::Embedding { .. } => 3,
        _ => 1,
    }
}

fn required<'a, T>(value: &'a Option<T>, path: &str, why: &str) -> Result<&'a T> {
    value.as_ref().ok_or_else(|| Error::Config {
        path: path.to_string(),
        message: format!("required {why}"),
    })
}

pub fn execute(command: &Command, cfg: &RunConfig, opts: &ExecOptions) -> Result<Outcome> {
    cfg.validate()?;
    if *command == Command::VocabStats {
        return Ok(Outcome {
            command: command.name().into(),
            run_dir: None,
            llm_requests: 0,
            summary: vocab_stats(cfg)?,
        });
    }
    let run = RunDir::open(&cfg.run_dir, &cfg.config_hash(), opts.force)?;
    let canonical = run.file("config.toml");
    std::fs::write(&canonical, cfg.to_toml_string()?).map_err(|e| Error::io(&canonical, e))?;
    let ctx = Ctx {
        cfg,
        run: &run,
        gateway: Gateway::new(cfg.seed).with_api_key(opts.api_key.clone()),
    };
    let summary = match command {
        Command::Ingest => ctx.ingest()?,
        Command::BuildIndex => ctx.build_index()?,
        Command::Complete => ctx.complete()?.0,
        Command::Map => ctx.map()?,
        Command::Summarise => ctx.summarise()?,
        Command::Rank => ctx.rank()?,
        Command::Combine => ctx.combine()?,
        Command::Run => ctx.run_all()?,
        Command::Optimize { gold } => ctx.optimize(gold.as_ref())?,
        Command::Evaluate { gold, group_by, curve } => ctx.evaluate(gold.as_ref(), *group_by, curve.as_ref())?,
        Command::SweepAlpha { gold } => ctx.sweep_alpha(gold.as_ref())?,
        Command::VocabStats => unreachable!("handled above"),
    };
    Ok(Outcome {
        command: command.name().into(),
        run_dir: Some(run.path().to_path_buf()),
        llm_requests: ctx.gateway.request_count(),
        summary,
    })
}

fn vocab_stats(cfg: &RunConfig) -> Result<Value> {
    let path = required(&cfg.vocabulary.path, "vocabulary.path", "by vocab-stats")?;
    let vocab = load_vocabulary(path)?;
    let (target, extension) = vocab.counts();
    let alt: usize = vocab.concepts().iter().map(|c| c.alt_labels.len()).sum();
    Ok(json!({
        "concepts": vocab.len(),
        "target": target,
        "extension": extension,
        "labels": vocab.len() + alt,
        "alt_labels": alt,
    }))
}

struct Ctx<'a> {
    cfg: &'a RunConfig,
    run: &'a RunDir,
    gateway: Gateway,
}

impl Ctx<'_> {
    fn write_jsonl<T: Serialize>(&self, stage: &str, name: &str, items: &[T]) -> Result<()> {
        jsonl::write_all(self.run.file(name), items)?;
        self.run.mark(stage, name)
    }

    fn write_json<T: Serialize>(&self, stage: &str, name: &str, value: &T) -> Result<()> {
        let path = self.run.file(name);
        let text = serde_json::to_string_pretty(value)? + "\n";
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        self.run.mark(stage, name)
    }

    fn vocab(&self) -> Result<Vocabulary> {
        load_vocabulary(required(&self.cfg.vocabulary.path, "vocabulary.path", "to map and filter suggestions")?)
    }

    fn embedder(&self) -> Result<Embedder> {
        Embedder::new(self.cfg.embedder.clone())
    }

    fn members(&self) -> Result<Vec<EnsembleMember>> {
        self.cfg.ensemble_members()
    }

    fn docs(&self) -> Result<Vec<Record>> {
        load_records(self.run.require("ingest", DOCS)?)
    }

    fn gold(&self, path: Option<&PathBuf>) -> Result<Gold> {
        let records = match path {
            Some(p) => load_records(p)?,
            None => self.docs()?,
        };
        let gold: Gold = gold_from_records(&records).into_iter().filter(|(_, g)| !g.is_empty()).collect();
        if gold.is_empty() {
            return Err(Error::MissingGold("no document carries gold labels".into()));
        }
        Ok(gold)
    }

    fn ingest(&self) -> Result<Value> {
        let path = required(&self.cfg.corpus.docs, "corpus.docs", "by ingest")?;
        let mut docs = load_records(path)?;
        if let Some(s) = self.cfg.corpus.sample {
            docs = stratified_disjoint_split(&docs, s.n, s.k, self.cfg.seed)?.swap_remove(s.subset);
        }
        write_records(self.run.file(DOCS), &docs)?;
        self.run.mark("ingest", DOCS)?;
        let mut train_len = 0;
        if let Some(train) = &self.cfg.corpus.train {
            let train = load_records(train)?;
            let doc_ids: BTreeSet<&str> = docs.iter().map(|d| d.id.as_str()).collect();
            if let Some(r) = train.iter().find(|r| doc_ids.contains(r.id.as_str())) {
                return Err(Error::InvalidArgument(format!(
                    "record {:?} appears in both the training and the document set",
                    r.id
                )));
            }
            train_len = train.len();
            write_records(self.run.file(TRAIN), &train)?;
            self.run.mark("ingest", TRAIN)?;
        }
        Ok(json!({ "docs": docs.len(), "train": train_len, "strata": strata(&docs) }))
    }

    fn build_index(&self) -> Result<Value> {
        let vocab = self.vocab()?;
        let index = build_index(&vocab, &self.embedder()?, self.cfg.mapping.index)?;
        index.save(self.run.file(INDEX))?;
        self.run.mark("build-index", INDEX)?;
        Ok(json!({ "entries": index.len(), "dimension": index.dimension() }))
    }

    fn index(&self, embedder: &Embedder) -> Result<VocabularyIndex> {
        let index = VocabularyIndex::load(self.run.require("build-index", INDEX)?)?;
        if index.dimension() != embedder.dimension() {
            return Err(Error::Config {
                path: "embedder.dimension".into(),
                message: format!(
                    "index was built with dimension {} but the embedder produces {}",
                    index.dimension(),
                    embedder.dimension()
                ),
            });
        }
        Ok(index)
    }

    /// Returns the summary and whether anything new was generated.
    fn complete(&self) -> Result<(Value, bool)> {
        required(&self.cfg.corpus.train, "corpus.train", "to sample few-shot examples")?;
        let docs = self.docs()?;
        let train = load_records(self.run.require("ingest", TRAIN)?)?;
        let vocab = self.vocab()?;
        let members = self.members()?;
        let used: BTreeSet<&str> = members.iter().map(|m| m.prompt_spec_id.as_str()).collect();
        let specs: Vec<_> = self
            .cfg
            .prompt_specs()
            .into_iter()
            .filter(|s| used.contains(s.prompt_id.as_str()))
            .collect();
        let book = PromptBook::build(&specs, &train, &vocab, self.cfg.prompts.template.clone())?;
        self.write_json("complete", PROMPTS, &book.prompts().collect::<Vec<_>>())?;

        let was_fresh = self.run.is_fresh(COMPLETE)?;
        let out = run_complete_stage(&docs, &members, &self.gateway, &book, Some(&self.run.file(COMPLETE)))?;
        self.run.mark("complete", COMPLETE)?;
        if out.total_pairs() > 0 && out.failures.len() == out.total_pairs() {
            return Err(Error::BackendUnavailable(format!(
                "all {} completions failed; first error: {}",
                out.failures.len(),
                out.failures[0].error.as_deref().unwrap_or("")
            )));
        }
        let summary = json!({
            "members": members.len(),
            "pairs": out.total_pairs(),
            "generated": out.generated,
            "failures": out.failures.len(),
        });
        Ok((summary, out.generated > 0 || !was_fresh))
    }

    fn map(&self) -> Result<Value> {
        let members = self.members()?;
        let complete = read_complete_store(&self.run.require("complete", COMPLETE)?, &members)?;
        let docs = self.docs()?;
        let embedder = self.embedder()?;
        let index = self.index(&embedder)?;
        let mapped = run_map_stage(&docs, &complete.keywords, &index, &embedder, &self.cfg.mapping_params())?;
        self.write_jsonl("map", MAPPED, &mapped)?;
        Ok(json!({ "mapped": mapped.len() }))
    }

    fn summarise(&self) -> Result<Value> {
        let mapped: Vec<MappedSuggestion> = jsonl::read_all(self.run.require("map", MAPPED)?)?;
        let ensemble = summarise(&mapped, self.members()?.len())?;
        self.write_jsonl("summarise", SUMMARISED, &ensemble)?;
        Ok(json!({ "suggestions": ensemble.len() }))
    }

    fn rank(&self) -> Result<Value> {
        let ensemble: Vec<EnsembleScore> = jsonl::read_all(self.run.require("summarise", SUMMARISED)?)?;
        let docs = self.docs()?;
        let vocab = self.vocab()?;
        let ranked = run_rank_stage(&docs, &ensemble, &vocab, &self.gateway, &self.cfg.rank, &self.cfg.combine)?;
        self.write_jsonl("rank", RANKED, &ranked)?;
        Ok(json!({ "ranked": ranked.len() }))
    }

    fn combine(&self) -> Result<Value> {
        let ranked: Vec<RankedSuggestion> = jsonl::read_all(self.run.require("rank", RANKED)?)?;
        let vocab = self.vocab()?;
        let unlimited = CombineConfig {
            max_suggestions_per_doc: None,
            ..self.cfg.combine
        };
        let scored = finalize(&combine(&ranked, &unlimited), &vocab, self.cfg.combine.max_suggestions_per_doc)?;
        self.write_jsonl("combine", FINAL, &scored)?;
        write_tsv(self.run.file(FINAL_TSV), &scored)?;
        self.run.mark("combine", FINAL_TSV)?;
        let docs: BTreeSet<&str> = scored.iter().map(|s| s.doc_id.as_str()).collect();
        Ok(json!({ "suggestions": scored.len(), "documents_with_suggestions": docs.len() }))
    }

    fn run_all(&self) -> Result<Value> {
        let mut steps = serde_json::Map::new();
        let train_missing = self.cfg.corpus.train.is_some() && !self.run.is_fresh(TRAIN)?;
        let mut dirty = false;
        if !self.run.is_fresh(DOCS)? || train_missing {
            steps.insert("ingest".into(), self.ingest()?);
            dirty = true;
        }
        let mut index_dirty = false;
        if !self.run.is_fresh(INDEX)? {
            steps.insert("build-index".into(), self.build_index()?);
            index_dirty = true;
        }
        let (complete, generated) = self.complete()?;
        steps.insert("complete".into(), complete);
        dirty |= generated;

        type Stage<'s, 'c> = (&'s str, &'s str, fn(&Ctx<'c>) -> Result<Value>);
        let stages: [Stage<'_, '_>; 4] = [
            ("map", MAPPED, Ctx::map),
            ("summarise", SUMMARISED, Ctx::summarise),
            ("rank", RANKED, Ctx::rank),
            ("combine", FINAL, Ctx::combine),
        ];
        for (i, (name, artifact, stage)) in stages.into_iter().enumerate() {
            if dirty || (i == 0 && index_dirty) || !self.run.is_fresh(artifact)? {
                steps.insert(name.into(), stage(self)?);
                dirty = true;
            } else {
                steps.insert(name.into(), json!("cached"));
            }
        }
        let has_gold = self.docs()?.iter().any(|d| !d.gold().is_empty());
        if has_gold && (dirty || !self.run.is_fresh(REPORT)?) {
            steps.insert("evaluate".into(), self.evaluate(None, None, None)?);
        }
        Ok(Value::Object(steps))
    }

    fn final_for(&self, gold: &Gold) -> Result<Vec<ScoredSuggestion>> {
        let scored: Vec<ScoredSuggestion> = jsonl::read_all(self.run.require("combine", FINAL)?)?;
        Ok(scored.into_iter().filter(|s| gold.contains_key(&s.doc_id)).collect())
    }

    fn evaluate(&self, gold_path: Option<&PathBuf>, group_by: Option<GroupBy>, curve: Option<&PathBuf>) -> Result<Value> {
        let gold = self.gold(gold_path)?;
        let scored = self.final_for(&gold)?;
        let ev = &self.cfg.evaluation;
        let report = evaluate(&scored, &gold, &ev.ks, ev.patk_denominator)?;
        let mut summary = serde_json::to_value(&report)?;
        if let Some(g) = group_by {
            let records = match gold_path {
                Some(p) => load_records(p)?,
                None => self.docs()?,
            };
            let groups = evaluate_grouped(&scored, &gold, &records, &ev.ks, ev.patk_denominator, g)?;
            summary["groups"] = serde_json::to_value(&groups)?;
        }
        self.write_json("evaluate", REPORT, &summary)?;
        if let Some(path) = curve {
            write_curve_csv(path, &pr_curve(&scored, &gold)?)?;
        }
        Ok(summary)
    }

    fn sweep_alpha(&self, gold_path: Option<&PathBuf>) -> Result<Value> {
        let gold = self.gold(gold_path)?;
        let vocab = self.vocab()?;
        let ranked: Vec<RankedSuggestion> = jsonl::read_all(self.run.require("rank", RANKED)?)?;
        let ranked: Vec<RankedSuggestion> = ranked
            .into_iter()
            .filter(|r| gold.contains_key(&r.doc_id) && vocab.is_target(&r.concept_id).unwrap_or(false))
            .collect();
        let sweep = alpha_sweep(&ranked, &gold, &self.cfg.evaluation.alphas)?;
        let rows: Vec<Value> = sweep.iter().map(|(a, auc)| json!({ "alpha": a, "pr_auc": auc })).collect();
        let best = sweep.iter().copied().reduce(|a, b| if b.1 > a.1 { b } else { a });
        let summary = json!({ "sweep": rows, "best_alpha": best.map(|b| b.0) });
        self.write_json("sweep-alpha", SWEEP, &summary)?;
        Ok(summary)
    }

    fn optimize(&self, gold_path: Option<&PathBuf>) -> Result<Value> {
        let gold = self.gold(gold_path)?;
        let vocab = self.vocab()?;
        let members: Vec<String> = self.members()?.into_iter().map(|m| m.member_id).collect();
        let mapped: Vec<MappedSuggestion> = jsonl::read_all(self.run.require("map", MAPPED)?)?;
        let ranked: Vec<RankedSuggestion> = jsonl::read_all(self.run.require("rank", RANKED)?)?;
        let cache = CachedEnsemble::new(&members, &mapped, &ranked, gold, self.cfg.combine)?.with_target_filter(&vocab);
        let o = self.cfg.optimize;
        let report = optimize(
            &cache,
            &members,
            &OptimizeConfig {
                budget: o.budget,
                size_range: o.size_range,
                target_size: o.target_size,
                epsilon: o.epsilon,
                seed: self.cfg.seed,
            },
        )?;
        let full = cache.evaluate_subset(&members)?;
        let mut summary = serde_json::to_value(&report)?;
        summary["full_ensemble_pr_auc"] = json!(full);
        self.write_json("optimize", OPTIMIZE, &summary)?;
        Ok(summary)
    }
}
