//! Controlled vocabulary with target-collection membership.
//!
//! The TSV layout is `id<TAB>pref_label<TAB>alt_labels<TAB>in_target_collection`
//! where `alt_labels` is pipe-separated (possibly empty) and the flag is `0` or
//! `1`. Lines starting with `#` and a leading `id\t...` header are skipped.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Concept {
    pub id: String,
    pub pref_label: String,
    #[serde(default)]
    pub alt_labels: Vec<String>,
    pub in_target_collection: bool,
}

impl Concept {
    /// Preferred label followed by the alternative labels.
    pub fn labels(&self) -> impl Iterator<Item = &str> {
        std::iter::once(self.pref_label.as_str()).chain(self.alt_labels.iter().map(String::as_str))
    }
}

#[derive(Debug, Clone, Default)]
pub struct Vocabulary {
    concepts: Vec<Concept>,
    by_id: HashMap<String, usize>,
    target_count: usize,
}

impl Vocabulary {
    pub fn from_concepts(concepts: impl IntoIterator<Item = Concept>) -> Result<Self> {
        let mut vocab = Vocabulary::default();
        for c in concepts {
            vocab.insert(c)?;
        }
        Ok(vocab)
    }

    fn insert(&mut self, concept: Concept) -> Result<()> {
        if concept.pref_label.trim().is_empty() {
            return Err(Error::InvalidArgument(format!(
                "concept {:?} has an empty preferred label",
                concept.id
            )));
        }
        if self.by_id.contains_key(&concept.id) {
            return Err(Error::DuplicateId(concept.id));
        }
        if concept.in_target_collection {
            self.target_count += 1;
        }
        self.by_id.insert(concept.id.clone(), self.concepts.len());
        self.concepts.push(concept);
        Ok(())
    }

    pub fn get(&self, id: &str) -> Option<&Concept> {
        self.by_id.get(id).map(|&i| &self.concepts[i])
    }

    pub fn require(&self, id: &str) -> Result<&Concept> {
        self.get(id).ok_or_else(|| Error::UnknownConcept(id.to_string()))
    }

    pub fn concepts(&self) -> &[Concept] {
        &self.concepts
    }

    pub fn len(&self) -> usize {
        self.concepts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.concepts.is_empty()
    }

    /// `(target_count, extension_count)`
    pub fn counts(&self) -> (usize, usize) {
        (self.target_count, self.concepts.len() - self.target_count)
    }

    pub fn is_target(&self, id: &str) -> Result<bool> {
        self.require(id).map(|c| c.in_target_collection)
    }
}

pub fn load_vocabulary(path: impl AsRef<Path>) -> Result<Vocabulary> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut vocab = Vocabulary::default();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let line = line.trim_end_matches(['\r', '\n']);
        if line.is_empty() || line.starts_with('#') || (idx == 0 && line.starts_with("id\t")) {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: idx + 1,
            message,
        };
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 4 {
            return Err(parse_err(format!("expected 4 columns, found {}", cols.len())));
        }
        let in_target_collection = match cols[3].trim() {
            "1" => true,
            "0" => false,
            other => return Err(parse_err(format!("collection flag must be 0 or 1, got {other:?}"))),
        };
        let alt_labels = cols[2]
            .split('|')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(String::from)
            .collect();
        let concept = Concept {
            id: cols[0].trim().to_string(),
            pref_label: cols[1].trim().to_string(),
            alt_labels,
            in_target_collection,
        };
        if concept.id.is_empty() {
            return Err(parse_err("empty id".into()));
        }
        match vocab.insert(concept) {
            Err(Error::InvalidArgument(m)) => return Err(parse_err(m)),
            other => other?,
        }
    }
    Ok(vocab)
}

pub fn write_vocabulary(path: impl AsRef<Path>, vocab: &Vocabulary) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(w, "id\tpref_label\talt_labels\tin_target_collection").map_err(io)?;
    for c in vocab.concepts() {
        writeln!(
            w,
            "{}\t{}\t{}\t{}",
            c.id,
            c.pref_label,
            c.alt_labels.join("|"),
            u8::from(c.in_target_collection)
        )
        .map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Anything that refers to a vocabulary concept.
pub trait ConceptRef {
    fn concept_id(&self) -> &str;
}

/// Drops suggestions whose concept lies outside the target collection,
/// preserving order. Unknown concept ids are an error.
pub fn filter_to_target<T: ConceptRef + Clone>(suggestions: &[T], vocab: &Vocabulary) -> Result<Vec<T>> {
    let mut kept = Vec::with_capacity(suggestions.len());
    for s in suggestions {
        if vocab.is_target(s.concept_id())? {
            kept.push(s.clone());
        }
    }
    Ok(kept)
}
