//! Precision/recall at k, the precision-recall curve and the alpha sweep on a
//! small hand-made example.
//!
//!     cargo run --example evaluate_metrics

use subject_ensemble::evaluation::{alpha_sweep, evaluate, pr_curve, Gold, PatkDenominator};
use subject_ensemble::pipeline::{combine, CombineConfig, RankedSuggestion};

fn main() -> subject_ensemble::Result<()> {
    let rows = [
        ("d1", "Windenergie", 0.9, 0.9),
        ("d1", "Klimapolitik", 0.6, 0.8),
        ("d1", "Hamburg", 0.8, 0.1),
        ("d2", "Bodenrecht", 0.4, 0.9),
        ("d2", "Agrarpolitik", 0.7, 0.3),
        ("d2", "Umweltrecht", 0.2, 0.7),
    ];
    let ranked: Vec<RankedSuggestion> = rows
        .iter()
        .map(|&(d, c, s_ens, s_rel)| RankedSuggestion {
            doc_id: d.into(),
            concept_id: c.into(),
            s_ens,
            s_rel,
        })
        .collect();
    let mut gold = Gold::new();
    gold.insert("d1".into(), ["Windenergie", "Klimapolitik"].map(String::from).into());
    gold.insert("d2".into(), ["Bodenrecht", "Umweltrecht", "Wasserrecht"].map(String::from).into());

    let scored = combine(&ranked, &CombineConfig::default());
    for s in &scored {
        println!("{} #{} {:<13} s_fin {:.2}", s.doc_id, s.rank, s.concept_id, s.s_fin);
    }
    let report = evaluate(&scored, &gold, &[1, 2, 3], PatkDenominator::K)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    for p in pr_curve(&scored, &gold)?.points {
        println!("t={:.2} P={:.3} R={:.3}", p.threshold, p.precision, p.recall);
    }
    for (alpha, auc) in alpha_sweep(&ranked, &gold, &[0.0, 0.3, 0.5, 1.0])? {
        println!("alpha {alpha:.1}: PR-AUC {auc:.4}");
    }
    Ok(())
}
