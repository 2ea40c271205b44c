mod common;

use std::collections::BTreeSet;

use common::{brute_at_k, brute_pr_auc, random_fixture, ranking, rng, Triples};
use subject_ensemble::ensemble_opt::{monte_carlo_search, CachedEnsemble};
use subject_ensemble::evaluation::{metrics_at_k, pr_auc, pr_curve_from_scores, Gold, PatkDenominator};
use subject_ensemble::mapping::MappedSuggestion;
use subject_ensemble::pipeline::{combine, summarise, CombineConfig, RankedSuggestion};

fn mapped(member: &str, concept: &str, sim: f64) -> MappedSuggestion {
    MappedSuggestion {
        doc_id: "d1".into(),
        member_id: member.into(),
        keyword: format!("{member}-{concept}-{sim}"),
        concept_id: concept.into(),
        similarity: sim,
    }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() < 1e-12
}

/// Three members, one document with gold {x, y}:
///
/// | member | x        | y   | z   |
/// |--------|----------|-----|-----|
/// | A      | 0.9, 0.6 |     | 0.8 |
/// | B      | 0.6      | 0.9 |     |
/// | C      |          | 0.3 |     |
///
/// s_ens: x = (0.9 + 0.6) / 3 = 0.5, y = (0.9 + 0.3) / 3 = 0.4, z = 0.8 / 3.
/// With s_rel x = 0.8, y = 0.2, z = 0.5 and alpha 0.3:
/// s_fin x = 0.71, z = 0.43, y = 0.26. The PR steps are (P 1, R 0.5),
/// (0.5, 0.5), (2/3, 1), so the area is 0.5 + 1/3.
fn three_member_fixture() -> (Vec<MappedSuggestion>, Vec<(&'static str, f64)>, Gold) {
    let m = vec![
        mapped("A", "x", 0.9),
        mapped("A", "x", 0.6),
        mapped("A", "z", 0.8),
        mapped("B", "x", 0.6),
        mapped("B", "y", 0.9),
        mapped("C", "y", 0.3),
    ];
    let rel = vec![("x", 0.8), ("y", 0.2), ("z", 0.5)];
    let gold: Gold = [("d1".to_string(), ["x", "y"].iter().map(|s| s.to_string()).collect())].into();
    (m, rel, gold)
}

#[test]
fn hand_computed_three_member_ensemble() {
    let (m, rel, gold) = three_member_fixture();
    let ens = summarise(&m, 3).unwrap();
    let s: Vec<(&str, f64)> = ens.iter().map(|e| (e.concept_id.as_str(), e.s_ens)).collect();
    assert_eq!(s.len(), 3);
    assert!(close(s[0].1, 0.5) && close(s[1].1, 0.4) && close(s[2].1, 0.8 / 3.0), "{s:?}");

    let ranked: Vec<RankedSuggestion> = ens
        .iter()
        .map(|e| RankedSuggestion {
            doc_id: e.doc_id.clone(),
            concept_id: e.concept_id.clone(),
            s_ens: e.s_ens,
            s_rel: rel.iter().find(|r| r.0 == e.concept_id).unwrap().1,
        })
        .collect();
    let scored = combine(&ranked, &CombineConfig::default());
    let order: Vec<(&str, usize)> = scored.iter().map(|s| (s.concept_id.as_str(), s.rank)).collect();
    assert_eq!(order, [("x", 1), ("z", 2), ("y", 3)]);
    assert!(close(scored[0].s_fin, 0.71));
    assert!(close(scored[1].s_fin, 0.3 * 0.8 / 3.0 + 0.7 * 0.5));
    assert!(close(scored[2].s_fin, 0.26));

    let cache = CachedEnsemble::new(
        &["A".into(), "B".into(), "C".into()],
        &m,
        &ranked,
        gold,
        CombineConfig::default(),
    )
    .unwrap();
    let auc = cache.evaluate_subset(&["A".into(), "B".into(), "C".into()]).unwrap();
    assert!(close(auc, 0.5 + 1.0 / 3.0), "{auc}");

    // B alone: x = 0.6, y = 0.9; s_fin x = 0.74, y = 0.41; both relevant
    let auc_b = cache.evaluate_subset(&["B".into()]).unwrap();
    assert!(close(auc_b, 1.0), "{auc_b}");
    // A alone: x = 0.9 -> 0.83, z = 0.8 -> 0.59; steps (1, 0.5), (0.5, 0.5)
    let auc_a = cache.evaluate_subset(&["A".into()]).unwrap();
    assert!(close(auc_a, 0.5), "{auc_a}");
}

#[test]
fn monte_carlo_with_full_budget_finds_the_enumerated_optimum() {
    let (m, rel, gold) = three_member_fixture();
    let ranked: Vec<RankedSuggestion> = summarise(&m, 3)
        .unwrap()
        .into_iter()
        .map(|e| RankedSuggestion {
            s_rel: rel.iter().find(|r| r.0 == e.concept_id).unwrap().1,
            doc_id: e.doc_id,
            concept_id: e.concept_id,
            s_ens: e.s_ens,
        })
        .collect();
    let members: Vec<String> = ["A", "B", "C"].iter().map(|s| s.to_string()).collect();
    let cache = CachedEnsemble::new(&members, &m, &ranked, gold, CombineConfig::default()).unwrap();

    let subsets: Vec<Vec<String>> = (1u32..8)
        .map(|mask| (0..3).filter(|i| mask & (1 << i) != 0).map(|i| members[i].clone()).collect())
        .collect();
    assert_eq!(subsets.len(), 7);
    let best = subsets
        .iter()
        .map(|s| (cache.evaluate_subset(s).unwrap(), s.clone()))
        .max_by(|a, b| a.0.total_cmp(&b.0).then(b.1.len().cmp(&a.1.len())).then(b.1.cmp(&a.1)))
        .unwrap();
    let found = monte_carlo_search(&cache, &members, 7, (1, 3), 9).unwrap();
    assert_eq!(found.samples.len(), 7);
    assert_eq!(found.best.member_ids, best.1);
    assert_eq!(found.best.objective, best.0);
}

#[test]
fn pr_curve_points_match_brute_force() {
    let mut r = rng(20);
    for _ in 0..30 {
        let (gold, triples) = random_fixture(&mut r);
        let curve = pr_curve_from_scores(triples.iter().map(|(d, c, s)| (d.as_str(), c.as_str(), *s)), &gold).unwrap();
        let thresholds: BTreeSet<u64> = triples.iter().map(|t| t.2.to_bits()).collect();
        assert_eq!(curve.points.len(), thresholds.len());
        for p in &curve.points {
            let kept: Triples = triples.iter().filter(|t| t.2 >= p.threshold).cloned().collect();
            let (mut ps, mut rs) = (0.0, 0.0);
            for (doc, g) in &gold {
                let mine: Vec<_> = kept.iter().filter(|t| &t.0 == doc).collect();
                if mine.is_empty() {
                    continue;
                }
                let hits = mine.iter().filter(|t| g.contains(&t.1)).count() as f64;
                ps += hits / mine.len() as f64;
                rs += hits / g.len() as f64;
            }
            let n = gold.len() as f64;
            assert!((p.precision - ps / n).abs() < 1e-9);
            assert!((p.recall - rs / n).abs() < 1e-9);
        }
        assert!((pr_auc(&curve) - brute_pr_auc(&triples, &gold)).abs() < 1e-9);
    }
}

#[test]
fn metrics_at_k_match_brute_force() {
    let mut r = rng(21);
    for _ in 0..50 {
        let (gold, triples) = random_fixture(&mut r);
        let preds = ranking(&triples);
        let ks = [1, 3, 5, 10, 20];
        let m = metrics_at_k(&preds, &gold, &ks, PatkDenominator::K).unwrap();
        for k in ks {
            let (p, rc) = brute_at_k(&preds, &gold, k);
            assert!((m.p_at[&k] - p).abs() < 1e-9);
            assert!((m.r_at[&k] - rc).abs() < 1e-9);
            let f = if p + rc > 0.0 { 2.0 * p * rc / (p + rc) } else { 0.0 };
            assert!((m.f1_at[&k] - f).abs() < 1e-9);
        }
    }
}
