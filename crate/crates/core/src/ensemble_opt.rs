//! Ensemble member selection by PR-AUC.
//!
//! Search runs entirely on cached stage outputs: per-member mapped
//! suggestions and per-(document, concept) relevance scores. A subset is
//! scored by re-running summarise and combine restricted to its members.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::{pr_auc, pr_curve, Gold};
use crate::llm::EnsembleMember;
use crate::mapping::MappedSuggestion;
use crate::pipeline::{combine, summarise, CombineConfig, RankedSuggestion, ScoredSuggestion};
use crate::vocabulary::Vocabulary;

/// Anything that scores a member subset. Member ids arrive sorted.
pub trait Objective: Sync {
    fn objective(&self, members: &[String]) -> Result<f64>;
}

impl<F> Objective for F
where
    F: Fn(&[String]) -> Result<f64> + Sync,
{
    fn objective(&self, members: &[String]) -> Result<f64> {
        self(members)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemberSubset {
    /// Sorted, unique.
    pub member_ids: Vec<String>,
    pub objective: f64,
}

impl MemberSubset {
    pub fn len(&self) -> usize {
        self.member_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.member_ids.is_empty()
    }

    /// Higher objective first, then fewer members, then smaller ids.
    fn beats(&self, other: &MemberSubset) -> bool {
        self.objective
            .total_cmp(&other.objective)
            .reverse()
            .then(self.len().cmp(&other.len()))
            .then_with(|| self.member_ids.cmp(&other.member_ids))
            .is_lt()
    }
}

/// Cached per-member suggestions and relevance scores for one evaluation split.
pub struct CachedEnsemble {
    members: BTreeSet<String>,
    mapped: BTreeMap<String, Vec<MappedSuggestion>>,
    relevance: HashMap<(String, String), f64>,
    gold: Gold,
    combine: CombineConfig,
    target: Option<HashSet<String>>,
}

impl CachedEnsemble {
    /// Suggestions for documents without a gold entry are ignored. Every
    /// mapped suggestion must belong to one of `members`.
    pub fn new(
        members: &[String],
        mapped: &[MappedSuggestion],
        ranked: &[RankedSuggestion],
        gold: Gold,
        combine: CombineConfig,
    ) -> Result<Self> {
        combine.validate()?;
        let members: BTreeSet<String> = members.iter().cloned().collect();
        let mut by_member: BTreeMap<String, Vec<MappedSuggestion>> =
            members.iter().map(|m| (m.clone(), Vec::new())).collect();
        for m in mapped.iter().filter(|m| gold.contains_key(&m.doc_id)) {
            by_member
                .get_mut(&m.member_id)
                .ok_or_else(|| Error::InvalidArgument(format!("mapped suggestion from unlisted member {:?}", m.member_id)))?
                .push(m.clone());
        }
        let relevance = ranked
            .iter()
            .map(|r| ((r.doc_id.clone(), r.concept_id.clone()), r.s_rel))
            .collect();
        Ok(Self {
            members,
            mapped: by_member,
            relevance,
            gold,
            combine,
            target: None,
        })
    }

    /// Restricts scoring to concepts of the target collection.
    pub fn with_target_filter(mut self, vocab: &Vocabulary) -> Self {
        self.target = Some(
            vocab
                .concepts()
                .iter()
                .filter(|c| c.in_target_collection)
                .map(|c| c.id.clone())
                .collect(),
        );
        self
    }

    pub fn member_ids(&self) -> Vec<String> {
        self.members.iter().cloned().collect()
    }

    /// Combined and filtered suggestions for a subset.
    pub fn suggestions(&self, subset: &[String]) -> Result<Vec<ScoredSuggestion>> {
        if subset.is_empty() {
            return Err(Error::InvalidArgument("empty member subset".into()));
        }
        let mut pooled = Vec::new();
        for id in subset {
            let list = self
                .mapped
                .get(id)
                .ok_or_else(|| Error::MissingCache(format!("no mapped suggestions cached for member {id:?}")))?;
            pooled.extend(list.iter().cloned());
        }
        let ensemble = summarise(&pooled, subset.len())?;
        let ranked = ensemble
            .into_iter()
            .filter(|e| self.target.as_ref().is_none_or(|t| t.contains(&e.concept_id)))
            .map(|e| {
                let s_rel = *self
                    .relevance
                    .get(&(e.doc_id.clone(), e.concept_id.clone()))
                    .ok_or_else(|| {
                        Error::MissingCache(format!("no relevance cached for ({}, {})", e.doc_id, e.concept_id))
                    })?;
                Ok(RankedSuggestion {
                    doc_id: e.doc_id,
                    concept_id: e.concept_id,
                    s_ens: e.s_ens,
                    s_rel,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(combine(&ranked, &self.combine))
    }

    pub fn evaluate_subset(&self, subset: &[String]) -> Result<f64> {
        let scored = self.suggestions(subset)?;
        Ok(pr_auc(&pr_curve(&scored, &self.gold)?))
    }
}

impl Objective for CachedEnsemble {
    fn objective(&self, members: &[String]) -> Result<f64> {
        self.evaluate_subset(members)
    }
}

fn sorted_unique(members: &[String]) -> Result<Vec<String>> {
    let set: BTreeSet<&String> = members.iter().collect();
    if set.len() != members.len() {
        return Err(Error::InvalidArgument("member ids must be unique".into()));
    }
    Ok(set.into_iter().cloned().collect())
}

fn score(objective: &impl Objective, mut ids: Vec<String>) -> Result<MemberSubset> {
    ids.sort();
    let value = objective.objective(&ids)?;
    Ok(MemberSubset {
        member_ids: ids,
        objective: value,
    })
}

fn binomial(n: usize, k: usize) -> u128 {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        match acc.checked_mul((n - i) as u128) {
            Some(v) => acc = v / (i + 1) as u128,
            None => return u128::MAX,
        }
    }
    acc
}

fn all_subsets(n: usize, size: usize, out: &mut Vec<Vec<usize>>) {
    fn rec(start: usize, n: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if left == 0 {
            out.push(cur.clone());
            return;
        }
        for i in start..=n - left {
            cur.push(i);
            rec(i + 1, n, left - 1, cur, out);
            cur.pop();
        }
    }
    rec(0, n, size, &mut Vec::new(), out);
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchOutcome {
    pub best: MemberSubset,
    /// Every distinct subset that was evaluated, in sampling order.
    pub samples: Vec<MemberSubset>,
}

/// Evaluates `budget` distinct random subsets whose sizes are drawn uniformly
/// from `size_range` (inclusive) and returns the best. When the budget covers
/// every subset in the range, all of them are evaluated.
pub fn monte_carlo_search(
    objective: &impl Objective,
    members: &[String],
    budget: usize,
    size_range: (usize, usize),
    seed: u64,
) -> Result<SearchOutcome> {
    let members = sorted_unique(members)?;
    let n = members.len();
    let (lo, hi) = size_range;
    if budget == 0 {
        return Err(Error::InvalidArgument("budget must be at least 1".into()));
    }
    if lo == 0 || lo > hi || hi > n {
        return Err(Error::InvalidArgument(format!(
            "size range ({lo}, {hi}) invalid for {n} members"
        )));
    }
    let total: u128 = (lo..=hi).map(|s| binomial(n, s)).fold(0, u128::saturating_add);

    let picks: Vec<Vec<usize>> = if budget as u128 >= total {
        let mut all = Vec::new();
        for s in lo..=hi {
            all_subsets(n, s, &mut all);
        }
        all
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut seen = HashSet::new();
        let mut picks = Vec::with_capacity(budget);
        while picks.len() < budget {
            let size = rng.random_range(lo..=hi);
            let mut pick = index::sample(&mut rng, n, size).into_vec();
            pick.sort_unstable();
            if seen.insert(pick.clone()) {
                picks.push(pick);
            }
        }
        picks
    };

    let samples: Vec<MemberSubset> = picks
        .into_par_iter()
        .map(|p| score(objective, p.into_iter().map(|i| members[i].clone()).collect()))
        .collect::<Result<_>>()?;
    let mut best = &samples[0];
    for s in &samples[1..] {
        if s.beats(best) {
            best = s;
        }
    }
    Ok(SearchOutcome {
        best: best.clone(),
        samples,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PruneStep {
    pub removed: String,
    pub objective_before: f64,
    pub objective_after: f64,
    pub size_after: usize,
    /// Accepted only because the subset was still above the target size.
    pub forced: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PruneOutcome {
    pub result: MemberSubset,
    pub trace: Vec<PruneStep>,
}

/// Greedy backward elimination. Each round tries every single removal and
/// takes the best one (ties to the smaller member id). It is applied when the
/// objective drops by at most `epsilon`, or unconditionally while the subset
/// is larger than `target_size`. Never goes below one member.
pub fn chain_prune(
    objective: &impl Objective,
    start: &MemberSubset,
    target_size: usize,
    epsilon: f64,
) -> Result<PruneOutcome> {
    let mut current = MemberSubset {
        member_ids: sorted_unique(&start.member_ids)?,
        objective: start.objective,
    };
    if target_size == 0 || target_size > current.len() {
        return Err(Error::InvalidArgument(format!(
            "target size {target_size} invalid for a subset of {}",
            current.len()
        )));
    }
    if !(epsilon >= 0.0) {
        return Err(Error::InvalidArgument("epsilon must be >= 0".into()));
    }
    let mut trace = Vec::new();
    while current.len() > 1 {
        let candidates: Vec<(String, MemberSubset)> = current
            .member_ids
            .par_iter()
            .map(|drop| {
                let rest: Vec<String> = current.member_ids.iter().filter(|m| *m != drop).cloned().collect();
                Ok((drop.clone(), score(objective, rest)?))
            })
            .collect::<Result<_>>()?;
        let (removed, next) = candidates
            .into_iter()
            .reduce(|a, b| if b.1.objective > a.1.objective { b } else { a })
            .expect("at least two members");
        let passes = next.objective >= current.objective - epsilon;
        let forced = current.len() > target_size;
        if !passes && !forced {
            break;
        }
        trace.push(PruneStep {
            removed,
            objective_before: current.objective,
            objective_after: next.objective,
            size_after: next.len(),
            forced: !passes,
        });
        current = next;
    }
    Ok(PruneOutcome { result: current, trace })
}

/// Fixed member selections used as baselines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "strategy", rename_all = "snake_case")]
pub enum Strategy {
    /// The first `k` of `ranking` (member ids, best first).
    TopK { ranking: Vec<String>, k: usize },
    OneModelAllPrompts { model: String },
    OnePromptAllModels { prompt: String },
    OneModelOnePrompt { model: String, prompt: String },
}

/// Sorted member ids the strategy denotes.
pub fn build_strategy_subset(members: &[EnsembleMember], strategy: &Strategy) -> Result<Vec<String>> {
    let pick = |f: &dyn Fn(&EnsembleMember) -> bool, what: String| -> Result<Vec<String>> {
        let mut ids: Vec<String> = members.iter().filter(|m| f(m)).map(|m| m.member_id.clone()).collect();
        if ids.is_empty() {
            return Err(Error::SelectorNotFound(what));
        }
        ids.sort();
        Ok(ids)
    };
    match strategy {
        Strategy::TopK { ranking, k } => {
            if *k == 0 || *k > ranking.len() {
                return Err(Error::InvalidArgument(format!("top-k with k={k} over {} ranked members", ranking.len())));
            }
            let known: HashSet<&str> = members.iter().map(|m| m.member_id.as_str()).collect();
            if let Some(bad) = ranking.iter().find(|r| !known.contains(r.as_str())) {
                return Err(Error::SelectorNotFound(format!("member {bad:?}")));
            }
            let mut ids = ranking[..*k].to_vec();
            ids.sort();
            Ok(ids)
        }
        Strategy::OneModelAllPrompts { model } => pick(&|m| &m.model.model_id == model, format!("model {model:?}")),
        Strategy::OnePromptAllModels { prompt } => pick(&|m| &m.prompt_spec_id == prompt, format!("prompt {prompt:?}")),
        Strategy::OneModelOnePrompt { model, prompt } => pick(
            &|m| &m.model.model_id == model && &m.prompt_spec_id == prompt,
            format!("member {model:?} × {prompt:?}"),
        ),
    }
}

/// Standalone objective of every member, best first, ties by id.
pub fn rank_members(objective: &impl Objective, members: &[String]) -> Result<Vec<MemberSubset>> {
    let mut out: Vec<MemberSubset> = sorted_unique(members)?
        .into_par_iter()
        .map(|m| score(objective, vec![m]))
        .collect::<Result<_>>()?;
    out.sort_by(|a, b| b.objective.total_cmp(&a.objective).then_with(|| a.member_ids.cmp(&b.member_ids)));
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizeConfig {
    pub budget: usize,
    /// Subset sizes sampled in the Monte-Carlo phase, clipped to the member count.
    pub size_range: (usize, usize),
    pub target_size: usize,
    pub epsilon: f64,
    pub seed: u64,
}

impl Default for OptimizeConfig {
    fn default() -> Self {
        Self {
            budget: 200,
            size_range: (50, 50),
            target_size: 20,
            epsilon: 0.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizeReport {
    pub seed: u64,
    pub budget: usize,
    pub size_range: (usize, usize),
    pub samples_evaluated: usize,
    pub monte_carlo: MemberSubset,
    pub chosen: MemberSubset,
    pub trace: Vec<PruneStep>,
}

/// Monte-Carlo search followed by chain pruning of its winner.
pub fn optimize(objective: &impl Objective, members: &[String], cfg: &OptimizeConfig) -> Result<OptimizeReport> {
    let n = members.len();
    if n == 0 {
        return Err(Error::InvalidArgument("no members to optimize over".into()));
    }
    let hi = cfg.size_range.1.clamp(1, n);
    let lo = cfg.size_range.0.clamp(1, hi);
    let search = monte_carlo_search(objective, members, cfg.budget, (lo, hi), cfg.seed)?;
    let target = cfg.target_size.clamp(1, search.best.len());
    let pruned = chain_prune(objective, &search.best, target, cfg.epsilon)?;
    Ok(OptimizeReport {
        seed: cfg.seed,
        budget: cfg.budget,
        size_range: (lo, hi),
        samples_evaluated: search.samples.len(),
        monte_carlo: search.best,
        chosen: pruned.result,
        trace: pruned.trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::ModelConfig;

    fn ids(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    /// Additive toy objective with a small penalty per member.
    fn weights(m: &[String]) -> Result<f64> {
        Ok(m.iter()
            .map(|id| match id.as_str() {
                "a" => 0.3,
                "b" => 0.2,
                "c" => -0.1,
                "d" => 0.05,
                _ => 0.0,
            })
            .sum())
    }

    #[test]
    fn exhaustive_budget_finds_optimum() {
        let members = ids(&["a", "b", "c", "d", "e"]);
        let out = monte_carlo_search(&weights, &members, 31, (1, 5), 9).unwrap();
        assert_eq!(out.samples.len(), 31);
        // "e" adds nothing, so the smaller subset wins the tie
        assert_eq!(out.best.member_ids, ids(&["a", "b", "d"]));
    }

    #[test]
    fn sampling_is_deterministic_and_distinct() {
        let members: Vec<String> = (0..12).map(|i| format!("m{i:02}")).collect();
        let a = monte_carlo_search(&weights, &members, 40, (2, 6), 5).unwrap();
        let b = monte_carlo_search(&weights, &members, 40, (2, 6), 5).unwrap();
        assert_eq!(a, b);
        let distinct: HashSet<_> = a.samples.iter().map(|s| s.member_ids.clone()).collect();
        assert_eq!(distinct.len(), 40);
        assert!(a.samples.iter().all(|s| (2..=6).contains(&s.len())));

        let one = monte_carlo_search(&weights, &members, 1, (3, 3), 5).unwrap();
        assert_eq!(one.best, one.samples[0]);
    }

    #[test]
    fn prune_drops_noise_first() {
        let start = score(&weights, ids(&["a", "b", "c"])).unwrap();
        let out = chain_prune(&weights, &start, 2, 0.0).unwrap();
        assert_eq!(out.trace.len(), 1);
        assert_eq!(out.trace[0].removed, "c");
        assert!(!out.trace[0].forced);
        assert_eq!(out.result.member_ids, ids(&["a", "b"]));
    }

    #[test]
    fn prune_fixed_point_and_forced_steps() {
        let start = score(&weights, ids(&["a", "b"])).unwrap();
        let out = chain_prune(&weights, &start, 2, 0.0).unwrap();
        assert_eq!(out.result, start);
        assert!(out.trace.is_empty());

        let out = chain_prune(&weights, &start, 1, 0.0).unwrap();
        assert_eq!(out.result.member_ids, ids(&["a"]));
        assert!(out.trace[0].forced);

        let all = score(&weights, ids(&["a", "b", "c", "d"])).unwrap();
        let out = chain_prune(&weights, &all, 1, f64::INFINITY).unwrap();
        assert_eq!(out.result.len(), 1);
        assert_eq!(out.trace.len(), 3);
        assert!(chain_prune(&weights, &all, 5, 0.0).is_err());
    }

    #[test]
    fn strategies() {
        let members: Vec<EnsembleMember> = ["m1", "m2", "m3"]
            .iter()
            .flat_map(|m| ["p01", "p02"].map(|p| EnsembleMember::new(ModelConfig::mock(*m), p)))
            .collect();
        let s = build_strategy_subset(&members, &Strategy::OneModelAllPrompts { model: "m2".into() }).unwrap();
        assert_eq!(s, ids(&["m2×p01", "m2×p02"]));
        let s = build_strategy_subset(&members, &Strategy::OnePromptAllModels { prompt: "p02".into() }).unwrap();
        assert_eq!(s.len(), 3);
        let s = build_strategy_subset(
            &members,
            &Strategy::OneModelOnePrompt { model: "m3".into(), prompt: "p01".into() },
        )
        .unwrap();
        assert_eq!(s, ids(&["m3×p01"]));
        assert!(matches!(
            build_strategy_subset(&members, &Strategy::OneModelAllPrompts { model: "zz".into() }),
            Err(Error::SelectorNotFound(_))
        ));
        let s = build_strategy_subset(
            &members,
            &Strategy::TopK { ranking: ids(&["m3×p02", "m1×p01", "m2×p01"]), k: 2 },
        )
        .unwrap();
        assert_eq!(s, ids(&["m1×p01", "m3×p02"]));
    }
}
