//! Deterministic synthetic corpora for offline runs, examples and tests.
//!
//! Concept labels are long German compounds and document filler words are
//! short, so the offline keyword generator (which picks the longest tokens)
//! mostly proposes label words. Every document also names an entity from the
//! extension part of the vocabulary.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Language, Record, RecordType};
use crate::vocabulary::{Concept, Vocabulary};

const PREFIXES: [(&str, &str); 15] = [
    ("Wind", "wind"),
    ("Solar", "solar"),
    ("Wasser", "water"),
    ("Klima", "climate"),
    ("Boden", "soil"),
    ("Verkehrs", "transport"),
    ("Bildungs", "education"),
    ("Gesundheits", "health"),
    ("Agrar", "agricultural"),
    ("Medien", "media"),
    ("Sozial", "social"),
    ("Energie", "energy"),
    ("Umwelt", "environmental"),
    ("Finanz", "financial"),
    ("Stadt", "urban"),
];

const SUFFIXES: [(&str, &str); 8] = [
    ("politik", "policy"),
    ("forschung", "research"),
    ("wirtschaft", "economics"),
    ("technik", "engineering"),
    ("recht", "law"),
    ("geschichte", "history"),
    ("planung", "planning"),
    ("management", "management"),
];

const ENTITIES: [&str; 12] = [
    "Niedersachsen",
    "Brandenburg",
    "Mecklenburg",
    "Thüringen",
    "Bundestag",
    "Bundesrat",
    "Europaparlament",
    "Weltbank",
    "Umweltbundesamt",
    "Hamburg",
    "Frankfurt",
    "Heidelberg",
];

const FILLER_DE: [&str; 20] = [
    "der", "die", "das", "und", "mit", "für", "zur", "vom", "im", "eine", "neue", "über", "beim", "sowie", "aber",
    "auch", "als", "nach", "bei", "aus",
];

const FILLER_EN: [&str; 14] = [
    "the", "and", "with", "for", "on", "of", "new", "from", "into", "its", "an", "at", "by", "this",
];

/// 120 target concepts (`t001`…) and 12 extension entities (`e01`…).
pub fn vocabulary() -> Vocabulary {
    let mut concepts = Vec::new();
    for (i, (pre, pre_en)) in PREFIXES.iter().enumerate() {
        for (j, (suf, suf_en)) in SUFFIXES.iter().enumerate() {
            concepts.push(Concept {
                id: format!("t{:03}", i * SUFFIXES.len() + j + 1),
                pref_label: format!("{pre}{suf}"),
                alt_labels: vec![format!("{pre_en} {suf_en}")],
                in_target_collection: true,
            });
        }
    }
    for (i, name) in ENTITIES.iter().enumerate() {
        concepts.push(Concept {
            id: format!("e{:02}", i + 1),
            pref_label: name.to_string(),
            alt_labels: Vec::new(),
            in_target_collection: false,
        });
    }
    Vocabulary::from_concepts(concepts).expect("generated ids are unique")
}

fn targets(vocab: &Vocabulary) -> Vec<&Concept> {
    vocab.concepts().iter().filter(|c| c.in_target_collection).collect()
}

fn filler(rng: &mut ChaCha8Rng, language: Language, n: usize) -> Vec<String> {
    let pool: &[&str] = match language {
        Language::De => &FILLER_DE,
        Language::En => &FILLER_EN,
    };
    (0..n).map(|_| pool.choose(rng).expect("nonempty").to_string()).collect()
}

fn surface(c: &Concept, language: Language) -> String {
    match language {
        Language::De => c.pref_label.clone(),
        Language::En => c.alt_labels.first().cloned().unwrap_or_else(|| c.pref_label.clone()),
    }
}

/// Interleaves `words` with short filler and splits into a title and abstract.
fn compose(rng: &mut ChaCha8Rng, language: Language, words: &[String]) -> (String, String) {
    let mut parts = Vec::new();
    for w in words {
        parts.extend(filler(rng, language, 2));
        parts.push(w.clone());
    }
    parts.extend(filler(rng, language, 3));
    let cut = (words.len().min(2) * 3).min(parts.len());
    let title = parts[..cut].join(" ");
    let abstract_text = format!("{}.", parts[cut..].join(" "));
    (title, abstract_text)
}

/// Test documents with gold labels. All but one gold concept and one
/// non-gold distractor concept are mentioned in the text, plus one entity.
pub fn documents(vocab: &Vocabulary, n: usize, seed: u64) -> Vec<Record> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let targets = targets(vocab);
    let entities: Vec<&Concept> = vocab.concepts().iter().filter(|c| !c.in_target_collection).collect();
    (0..n)
        .map(|i| {
            let language = if i % 5 == 4 { Language::En } else { Language::De };
            let k = rng.random_range(3..=6);
            let mut picked: Vec<&Concept> = targets.choose_multiple(&mut rng, k + 1).copied().collect();
            let distractor = picked.pop().expect("k + 1 picks");
            let gold: Vec<String> = picked.iter().map(|c| c.id.clone()).collect();
            let mut words: Vec<String> = picked[..k - 1].iter().map(|c| surface(c, language)).collect();
            words.push(surface(distractor, language));
            if let Some(e) = entities.choose(&mut rng) {
                words.push(e.pref_label.clone());
            }
            words.shuffle(&mut rng);
            let (title, abstract_text) = compose(&mut rng, language, &words);
            Record {
                id: format!("doc{:03}", i + 1),
                title,
                abstract_text,
                language,
                record_type: RecordType::ALL[(i + i / 5) % RecordType::ALL.len()],
                gold_labels: Some(gold),
            }
        })
        .collect()
}

/// Training records covering every prompt configuration: both languages,
/// label counts from 1 to 8, and texts that either mention all of their
/// labels or none of them.
pub fn training_records(vocab: &Vocabulary, n: usize, seed: u64) -> Vec<Record> {
    const COUNTS: [usize; 6] = [1, 2, 5, 6, 7, 8];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let targets = targets(vocab);
    (0..n)
        .map(|i| {
            let language = if i % 4 == 3 { Language::En } else { Language::De };
            let k = COUNTS[(i / 2) % COUNTS.len()];
            let mentions = i % 2 == 0;
            let mut picked: Vec<&Concept> = targets.choose_multiple(&mut rng, 2 * k).copied().collect();
            let others = picked.split_off(k);
            let shown = if mentions { &picked } else { &others };
            let words: Vec<String> = shown.iter().map(|c| surface(c, language)).collect();
            let (title, abstract_text) = compose(&mut rng, language, &words);
            Record {
                id: format!("train{:03}", i + 1),
                title,
                abstract_text,
                language,
                record_type: RecordType::ALL[i % RecordType::ALL.len()],
                gold_labels: Some(picked.iter().map(|c| c.id.clone()).collect()),
            }
        })
        .collect()
}

pub struct SyntheticCorpus {
    pub vocabulary: Vocabulary,
    pub train: Vec<Record>,
    pub docs: Vec<Record>,
}

/// The bundled fixture: 96 training records and 25 test documents.
pub fn corpus(seed: u64) -> SyntheticCorpus {
    let vocabulary = vocabulary();
    let train = training_records(&vocabulary, 96, seed);
    let docs = documents(&vocabulary, 25, seed.wrapping_add(1));
    SyntheticCorpus {
        vocabulary,
        train,
        docs,
    }
}
