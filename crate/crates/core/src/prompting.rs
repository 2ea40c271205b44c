//! Few-shot example sampling and prompt rendering.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Language, Record};
use crate::error::{Error, Result};
use crate::features::normalized_tokens;
use crate::vocabulary::Vocabulary;

/// Instruction for keyword completion.
pub const COMPLETE_INSTRUCTION: &str = "Dies ist eine Unterhaltung zwischen einem intelligenten, \
hilfsbereitem KI-Assistenten und einem Nutzer. Der Assistent antwortet mit Schlagwörtern auf den \
Text des Nutzers.";

/// Instruction for relevance rating.
pub const RANK_INSTRUCTION: &str = "Du erhälst einen Text und ein Schlagwort. Bewerte auf einer \
Skala von 1 bis 10, wie gut das Schlagwort zu dem Text passt. Nenne keine Begründungen. Gib nur die \
Zahl zwischen 1 und 10 zurück.";

pub const DEFAULT_COMPLETE_TEMPLATE: &str = "{instruction}\n\n{examples}Text: {query}\nSchlagwörter:";

pub const DEFAULT_RANK_TEMPLATE: &str = "{instruction}\n\nText: {text}\nSchlagwort: {keyword}\nBewertung:";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LanguageMode {
    German,
    English,
    Mixed,
}

impl LanguageMode {
    pub fn admits(self, language: Language) -> bool {
        match self {
            LanguageMode::German => language == Language::De,
            LanguageMode::English => language == Language::En,
            LanguageMode::Mixed => true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PromptSpec {
    pub prompt_id: String,
    pub language_mode: LanguageMode,
    pub n_examples: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label_count_range: Option<(usize, usize)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lemma_overlap_range: Option<(f64, f64)>,
    #[serde(default)]
    pub seed: u64,
}

impl PromptSpec {
    pub fn validate(&self) -> Result<()> {
        if !matches!(self.n_examples, 8 | 12) {
            return Err(Error::InvalidArgument(format!(
                "{}: n_examples must be 8 or 12, got {}",
                self.prompt_id, self.n_examples
            )));
        }
        if let Some((lo, hi)) = self.label_count_range {
            if lo > hi || lo == 0 {
                return Err(Error::InvalidArgument(format!(
                    "{}: label count range ({lo}, {hi}) is not well-ordered",
                    self.prompt_id
                )));
            }
        }
        if let Some((lo, hi)) = self.lemma_overlap_range {
            if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) || lo > hi {
                return Err(Error::InvalidArgument(format!(
                    "{}: lemma overlap range ({lo}, {hi}) must be ordered within [0, 1]",
                    self.prompt_id
                )));
            }
        }
        Ok(())
    }

    fn accepts_label_count(&self, n: usize) -> bool {
        self.label_count_range.is_none_or(|(lo, hi)| (lo..=hi).contains(&n))
    }

    fn accepts_overlap(&self, overlap: f64) -> bool {
        self.lemma_overlap_range
            .is_none_or(|(lo, hi)| overlap >= lo && overlap <= hi)
    }

    /// Whether a record (rendered text and German labels) satisfies this spec.
    pub fn accepts(&self, language: Language, text: &str, labels: &[String]) -> bool {
        if labels.is_empty() || !self.language_mode.admits(language) || !self.accepts_label_count(labels.len()) {
            return false;
        }
        self.lemma_overlap_range.is_none()
            || lemma_overlap(text, labels).is_ok_and(|o| self.accepts_overlap(o))
    }
}

/// The fifteen example-sampling configurations: five German, three English and
/// three mixed prompts without constraints, then four German prompts
/// constrained on label count and lemma overlap.
pub fn standard_prompt_specs(base_seed: u64) -> Vec<PromptSpec> {
    use LanguageMode::*;
    let rows: [(LanguageMode, usize, Option<(usize, usize)>, Option<(f64, f64)>); 15] = [
        (German, 8, None, None),
        (German, 8, None, None),
        (German, 8, None, None),
        (German, 8, None, None),
        (German, 8, None, None),
        (English, 8, None, None),
        (English, 8, None, None),
        (English, 12, None, None),
        (Mixed, 8, None, None),
        (Mixed, 8, None, None),
        (Mixed, 12, None, None),
        (German, 8, Some((1, 2)), Some((0.7, 1.0))),
        (German, 8, Some((1, 2)), Some((0.0, 0.3))),
        (German, 8, Some((5, 10)), Some((0.7, 1.0))),
        (German, 8, Some((5, 10)), Some((0.0, 0.3))),
    ];
    rows.into_iter()
        .enumerate()
        .map(|(i, (language_mode, n_examples, labels, overlap))| PromptSpec {
            prompt_id: format!("p{:02}", i + 1),
            language_mode,
            n_examples,
            label_count_range: labels,
            lemma_overlap_range: overlap,
            seed: base_seed.wrapping_add(i as u64 + 1),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Example {
    pub text: String,
    pub labels: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prompt {
    pub spec: PromptSpec,
    pub instruction: String,
    pub examples: Vec<Example>,
}

/// Share of labels whose normalized tokens all occur among the text's tokens.
pub fn lemma_overlap(text: &str, labels: &[String]) -> Result<f64> {
    if labels.is_empty() {
        return Err(Error::InvalidArgument("lemma overlap needs at least one label".into()));
    }
    let vocab: HashSet<String> = normalized_tokens(text).collect();
    let covered = labels
        .iter()
        .filter(|label| {
            let mut tokens = normalized_tokens(label).peekable();
            tokens.peek().is_some() && tokens.all(|t| vocab.contains(&t))
        })
        .count();
    Ok(covered as f64 / labels.len() as f64)
}

/// Gold labels of a record rendered as preferred labels.
pub fn render_labels(record: &Record, vocab: &Vocabulary) -> Result<Vec<String>> {
    record
        .gold()
        .iter()
        .map(|id| vocab.require(id).map(|c| c.pref_label.clone()))
        .collect()
}

/// Draws `spec.n_examples` training records that satisfy `spec`, without
/// replacement, in seeded shuffle order.
pub fn sample_examples(train: &[Record], spec: &PromptSpec, vocab: &Vocabulary) -> Result<Prompt> {
    spec.validate()?;
    let mut candidates = Vec::new();
    for record in train {
        if record.gold().is_empty() || !spec.language_mode.admits(record.language) {
            continue;
        }
        let labels = render_labels(record, vocab)?;
        let text = record.text();
        if spec.accepts(record.language, &text, &labels) {
            candidates.push(Example { text, labels });
        }
    }
    if candidates.len() < spec.n_examples {
        return Err(Error::Infeasible(format!(
            "prompt {} needs {} examples but only {} training records match",
            spec.prompt_id,
            spec.n_examples,
            candidates.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    candidates.shuffle(&mut rng);
    candidates.truncate(spec.n_examples);
    Ok(Prompt {
        spec: spec.clone(),
        instruction: COMPLETE_INSTRUCTION.to_string(),
        examples: candidates,
    })
}

/// Substitutes `{name}` placeholders. `{{` and `}}` produce literal braces.
/// Every name in `values` must appear in the template and nothing else may.
pub fn render_template(template: &str, values: &[(&str, &str)]) -> Result<String> {
    let mut out = String::with_capacity(template.len());
    let mut used = vec![false; values.len()];
    let mut rest = template;
    while let Some(pos) = rest.find(['{', '}']) {
        out.push_str(&rest[..pos]);
        let tail = &rest[pos..];
        if tail.starts_with("{{") || tail.starts_with("}}") {
            out.push_str(&tail[..1]);
            rest = &tail[2..];
            continue;
        }
        if tail.starts_with('}') {
            return Err(Error::Template("unmatched '}'".into()));
        }
        let end = tail
            .find('}')
            .ok_or_else(|| Error::Template("unterminated placeholder".into()))?;
        let name = &tail[1..end];
        let slot = values
            .iter()
            .position(|(k, _)| *k == name)
            .ok_or_else(|| Error::Template(format!("unknown placeholder {{{name}}}")))?;
        used[slot] = true;
        out.push_str(values[slot].1);
        rest = &tail[end + 1..];
    }
    out.push_str(rest);
    if let Some(i) = used.iter().position(|u| !u) {
        return Err(Error::Template(format!("template lacks placeholder {{{}}}", values[i].0)));
    }
    Ok(out)
}

/// Renders a completion prompt: instruction, each example as text followed by
/// its comma-joined labels, then the query with an empty completion slot.
pub fn assemble_prompt(prompt: &Prompt, query_text: &str, template: &str) -> Result<String> {
    let mut examples = String::new();
    for ex in &prompt.examples {
        examples.push_str("Text: ");
        examples.push_str(&ex.text);
        examples.push_str("\nSchlagwörter: ");
        examples.push_str(&ex.labels.join(", "));
        examples.push_str("\n\n");
    }
    render_template(
        template,
        &[
            ("instruction", &prompt.instruction),
            ("examples", &examples),
            ("query", query_text),
        ],
    )
}

pub fn assemble_rank_prompt(text: &str, keyword: &str, template: &str) -> Result<String> {
    render_template(
        template,
        &[("instruction", RANK_INSTRUCTION), ("text", text), ("keyword", keyword)],
    )
}
