//! Document records, their text representation, and stratified evaluation splits.
//!
//! Records are read from JSON Lines, one object per line:
//!
//! ```text
//! {"id": "3A1831638150", "title": "...", "abstract": "...", "language": "en",
//!  "record_type": "Article", "gold_labels": ["gnd:4034402-0"]}
//! ```
//!
//! `gold_labels` may be omitted for unlabeled data. When converting from the
//! shared-task JSON-LD, `title` maps to `title`, `abstract` to `abstract`,
//! the language tag and the directory-level text type to `language` and
//! `record_type`, and the `dcterms:subject` ids to `gold_labels`.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Language {
    De,
    En,
}

impl fmt::Display for Language {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Language::De => "de",
            Language::En => "en",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RecordType {
    Article,
    Book,
    Conference,
    Report,
    Thesis,
}

impl RecordType {
    pub const ALL: [RecordType; 5] = [
        RecordType::Article,
        RecordType::Book,
        RecordType::Conference,
        RecordType::Report,
        RecordType::Thesis,
    ];
}

impl fmt::Display for RecordType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Record {
    pub id: String,
    pub title: String,
    #[serde(rename = "abstract", default)]
    pub abstract_text: String,
    pub language: Language,
    pub record_type: RecordType,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold_labels: Option<Vec<String>>,
}

impl Record {
    /// Title and abstract joined by a single space.
    pub fn text(&self) -> String {
        text_representation(&self.title, &self.abstract_text)
    }

    pub fn gold(&self) -> &[String] {
        self.gold_labels.as_deref().unwrap_or(&[])
    }

    pub fn stratum(&self) -> (Language, RecordType) {
        (self.language, self.record_type)
    }
}

pub fn text_representation(title: &str, abstract_text: &str) -> String {
    let title = title.trim();
    let abstract_text = abstract_text.trim();
    match (title.is_empty(), abstract_text.is_empty()) {
        (_, true) => title.to_string(),
        (true, false) => abstract_text.to_string(),
        (false, false) => format!("{title} {abstract_text}"),
    }
}

/// Reads a JSON Lines records file. Blank lines are skipped.
pub fn load_records(path: impl AsRef<Path>) -> Result<Vec<Record>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut records = Vec::new();
    let mut seen = HashSet::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: idx + 1,
            message,
        };
        let record: Record = serde_json::from_str(&line).map_err(|e| parse_err(e.to_string()))?;
        if record.id.is_empty() {
            return Err(parse_err("empty id".into()));
        }
        if !seen.insert(record.id.clone()) {
            return Err(Error::DuplicateId(record.id));
        }
        records.push(record);
    }
    Ok(records)
}

pub fn write_records(path: impl AsRef<Path>, records: &[Record]) -> Result<()> {
    crate::jsonl::write_all(path, records)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stratum {
    pub language: Language,
    pub record_type: RecordType,
    pub proportion: f64,
}

/// Strata of a corpus in sort order (language, then record type).
pub fn strata(records: &[Record]) -> Vec<Stratum> {
    let mut counts: BTreeMap<(Language, RecordType), usize> = BTreeMap::new();
    for r in records {
        *counts.entry(r.stratum()).or_default() += 1;
    }
    let total = records.len() as f64;
    counts
        .into_iter()
        .map(|((language, record_type), c)| Stratum {
            language,
            record_type,
            proportion: c as f64 / total,
        })
        .collect()
}

/// Largest-remainder apportionment of `n` over `proportions`.
/// Ties in the fractional remainder go to the earlier index.
pub(crate) fn apportion(n: usize, proportions: &[f64]) -> Vec<usize> {
    let exact: Vec<f64> = proportions.iter().map(|p| p * n as f64).collect();
    let mut quotas: Vec<usize> = exact.iter().map(|x| x.floor() as usize).collect();
    let assigned: usize = quotas.iter().sum();
    let mut order: Vec<usize> = (0..proportions.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in order.iter().take(n.saturating_sub(assigned)) {
        quotas[i] += 1;
    }
    quotas
}

/// Draws `k` pairwise disjoint subsets of exactly `n` records each, keeping the
/// corpus proportions over language × record type.
///
/// Each subset lists its records in corpus order.
pub fn stratified_disjoint_split(
    records: &[Record],
    n: usize,
    k: usize,
    seed: u64,
) -> Result<Vec<Vec<Record>>> {
    if n.checked_mul(k).is_none_or(|need| need > records.len()) {
        return Err(Error::Infeasible(format!(
            "{k} subsets of {n} records need more than the {} available",
            records.len()
        )));
    }
    if n == 0 || k == 0 {
        return Ok(vec![Vec::new(); k]);
    }

    let mut members: BTreeMap<(Language, RecordType), Vec<usize>> = BTreeMap::new();
    for (i, r) in records.iter().enumerate() {
        members.entry(r.stratum()).or_default().push(i);
    }
    let proportions: Vec<f64> = members
        .values()
        .map(|m| m.len() as f64 / records.len() as f64)
        .collect();
    let quotas = apportion(n, &proportions);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut subsets: Vec<Vec<usize>> = vec![Vec::with_capacity(n); k];
    for ((stratum, idxs), quota) in members.iter().zip(&quotas) {
        if idxs.len() < quota * k {
            return Err(Error::Infeasible(format!(
                "stratum {}/{} has {} records but {} are needed",
                stratum.0,
                stratum.1,
                idxs.len(),
                quota * k
            )));
        }
        let mut pool = idxs.clone();
        pool.shuffle(&mut rng);
        for (j, subset) in subsets.iter_mut().enumerate() {
            subset.extend_from_slice(&pool[j * quota..(j + 1) * quota]);
        }
    }

    Ok(subsets
        .into_iter()
        .map(|mut s| {
            s.sort_unstable();
            s.into_iter().map(|i| records[i].clone()).collect()
        })
        .collect())
}
