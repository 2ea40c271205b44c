use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::evaluation::PatkDenominator;
use crate::llm::{EnsembleMember, ModelConfig};
use crate::mapping::embed::MIN_DIMENSION;
use crate::mapping::{EmbedderConfig, EmbedderKind, IndexParams, MappingParams};
use crate::pipeline::{CombineConfig, PipelineConfig, RankConfig};
use crate::prompting::{standard_prompt_specs, PromptSpec, DEFAULT_COMPLETE_TEMPLATE};

/// Environment variables that override endpoints and credentials.
pub const ENV_LLM_ENDPOINT: &str = "SUBJEX_LLM_ENDPOINT";
pub const ENV_RANK_ENDPOINT: &str = "SUBJEX_RANK_ENDPOINT";
pub const ENV_EMBED_ENDPOINT: &str = "SUBJEX_EMBED_ENDPOINT";
pub const ENV_API_KEY: &str = "SUBJEX_API_KEY";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Drives corpus sampling, example sampling and the offline backends.
    pub seed: u64,
    pub run_dir: PathBuf,
    pub corpus: CorpusConfig,
    pub vocabulary: VocabularyConfig,
    pub models: Vec<ModelConfig>,
    pub prompts: PromptsConfig,
    /// Model × prompt pairs. Empty means every model with every prompt.
    pub members: Vec<MemberRef>,
    pub embedder: EmbedderConfig,
    pub mapping: MappingConfig,
    pub rank: RankConfig,
    pub combine: CombineConfig,
    pub evaluation: EvaluationConfig,
    pub optimize: OptimizeSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            run_dir: PathBuf::from("runs"),
            corpus: CorpusConfig::default(),
            vocabulary: VocabularyConfig::default(),
            models: Vec::new(),
            prompts: PromptsConfig::default(),
            members: Vec::new(),
            embedder: EmbedderConfig::default(),
            mapping: MappingConfig::default(),
            rank: RankConfig::default(),
            combine: CombineConfig::default(),
            evaluation: EvaluationConfig::default(),
            optimize: OptimizeSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub docs: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub train: Option<PathBuf>,
    /// Draw a stratified subset of `docs` instead of using all of them.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sample: Option<SampleConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleConfig {
    pub n: usize,
    #[serde(default = "one")]
    pub k: usize,
    #[serde(default)]
    pub subset: usize,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VocabularyConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PromptsConfig {
    /// Empty means the fifteen standard configurations seeded from `seed`.
    pub specs: Vec<PromptSpec>,
    pub template: String,
}

impl Default for PromptsConfig {
    fn default() -> Self {
        Self {
            specs: Vec::new(),
            template: DEFAULT_COMPLETE_TEMPLATE.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MemberRef {
    pub model: String,
    pub prompt: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MappingConfig {
    pub hybrid_weight: f64,
    pub threshold: f64,
    pub index: IndexParams,
}

impl Default for MappingConfig {
    fn default() -> Self {
        let p = MappingParams::default();
        Self {
            hybrid_weight: p.hybrid_weight,
            threshold: p.threshold,
            index: IndexParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationConfig {
    pub ks: Vec<usize>,
    pub patk_denominator: PatkDenominator,
    pub alphas: Vec<f64>,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        Self {
            ks: vec![5, 10, 20, 50],
            patk_denominator: PatkDenominator::K,
            alphas: (0..=10).map(|i| i as f64 / 10.0).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizeSection {
    pub budget: usize,
    pub size_range: (usize, usize),
    pub target_size: usize,
    pub epsilon: f64,
}

impl Default for OptimizeSection {
    fn default() -> Self {
        Self {
            budget: 200,
            size_range: (50, 50),
            target_size: 20,
            epsilon: 0.0,
        }
    }
}

fn violation(path: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Config {
        path: path.into(),
        message: message.into(),
    }
}

fn in_unit(path: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(violation(path, format!("{v} is outside [0, 1]")))
    }
}

impl RunConfig {
    /// Parses TOML; type errors and unknown fields are reported with their path.
    pub fn from_toml_str(raw: &str) -> Result<Self> {
        let de = toml::Deserializer::parse(raw).map_err(|e| violation("<document>", e.to_string()))?;
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            violation(if path == "." { "<document>".to_string() } else { path }, e.into_inner().to_string())
        })
    }

    /// Canonical TOML form; parsing it yields an equal config.
    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| violation("<document>", e.to_string()))
    }

    /// Checks value ranges and cross references.
    pub fn validate(&self) -> Result<()> {
        if self.seed > i64::MAX as u64 {
            return Err(violation("seed", "must fit in a signed 64-bit integer"));
        }
        in_unit("combine.alpha", self.combine.alpha)?;
        in_unit("combine.rank_default", self.combine.rank_default)?;
        if self.combine.max_suggestions_per_doc == Some(0) {
            return Err(violation("combine.max_suggestions_per_doc", "must be at least 1"));
        }
        in_unit("mapping.hybrid_weight", self.mapping.hybrid_weight)?;
        in_unit("mapping.threshold", self.mapping.threshold)?;
        let hnsw = &self.mapping.index.hnsw;
        if hnsw.m < 2 {
            return Err(violation("mapping.index.hnsw.m", "must be at least 2"));
        }
        if hnsw.ef_construction == 0 || hnsw.ef_search == 0 {
            return Err(violation("mapping.index.hnsw", "ef values must be positive"));
        }
        let bm25 = &self.mapping.index.bm25;
        if !(bm25.k1 >= 0.0) {
            return Err(violation("mapping.index.bm25.k1", "must be >= 0"));
        }
        in_unit("mapping.index.bm25.b", bm25.b)?;
        if self.embedder.dimension < MIN_DIMENSION {
            return Err(violation("embedder.dimension", format!("must be at least {MIN_DIMENSION}")));
        }
        if self.embedder.kind == EmbedderKind::HttpService && self.embedder.endpoint.is_none() {
            return Err(violation("embedder.endpoint", "required for the http_service embedder"));
        }
        for (i, m) in self.models.iter().enumerate() {
            m.validate().map_err(|e| violation(format!("models[{i}]"), e.to_string()))?;
            if self.models[..i].iter().any(|o| o.model_id == m.model_id) {
                return Err(violation(format!("models[{i}].model_id"), format!("duplicate model {:?}", m.model_id)));
            }
        }
        self.rank
            .model
            .validate()
            .map_err(|e| violation("rank.model", e.to_string()))?;
        if self.rank.scale_max == 0 {
            return Err(violation("rank.scale_max", "must be at least 1"));
        }
        let specs = self.prompt_specs();
        for (i, s) in self.prompts.specs.iter().enumerate() {
            s.validate().map_err(|e| violation(format!("prompts.specs[{i}]"), e.to_string()))?;
        }
        for (i, m) in self.members.iter().enumerate() {
            if !self.models.iter().any(|x| x.model_id == m.model) {
                return Err(violation(format!("members[{i}].model"), format!("unknown model {:?}", m.model)));
            }
            if !specs.iter().any(|s| s.prompt_id == m.prompt) {
                return Err(violation(format!("members[{i}].prompt"), format!("unknown prompt {:?}", m.prompt)));
            }
        }
        if self.evaluation.ks.is_empty() || self.evaluation.ks.contains(&0) {
            return Err(violation("evaluation.ks", "needs at least one positive k"));
        }
        for (i, &a) in self.evaluation.alphas.iter().enumerate() {
            in_unit(&format!("evaluation.alphas[{i}]"), a)?;
        }
        let o = &self.optimize;
        if o.budget == 0 {
            return Err(violation("optimize.budget", "must be at least 1"));
        }
        if o.size_range.0 == 0 || o.size_range.0 > o.size_range.1 {
            return Err(violation("optimize.size_range", "must be an ordered pair of positive sizes"));
        }
        if o.target_size == 0 {
            return Err(violation("optimize.target_size", "must be at least 1"));
        }
        if !(o.epsilon >= 0.0) {
            return Err(violation("optimize.epsilon", "must be >= 0"));
        }
        if let Some(s) = &self.corpus.sample {
            if s.n == 0 || s.k == 0 || s.subset >= s.k {
                return Err(violation("corpus.sample", "needs n >= 1, k >= 1 and subset < k"));
            }
        }
        Ok(())
    }

    /// Makes relative paths relative to `base`.
    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.run_dir);
        for p in [&mut self.corpus.docs, &mut self.corpus.train, &mut self.vocabulary.path]
            .into_iter()
            .flatten()
        {
            fix(p);
        }
    }

    /// Endpoint overrides from the environment.
    pub fn apply_env(&mut self, get: impl Fn(&str) -> Option<String>) {
        if let Some(url) = get(ENV_LLM_ENDPOINT) {
            for m in &mut self.models {
                m.endpoint = url.clone();
            }
        }
        if let Some(url) = get(ENV_RANK_ENDPOINT) {
            self.rank.model.endpoint = url;
        }
        if let Some(url) = get(ENV_EMBED_ENDPOINT) {
            self.embedder.endpoint = Some(url);
        }
    }

    /// Hash of everything that influences stage artifacts. The run directory,
    /// evaluation and optimizer settings are left out.
    pub fn config_hash(&self) -> String {
        let mut c = self.clone();
        c.run_dir = PathBuf::new();
        c.evaluation = EvaluationConfig::default();
        c.optimize = OptimizeSection::default();
        let canonical = serde_json::to_string(&serde_json::to_value(&c).expect("config is serializable"))
            .expect("json value serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        hex::encode(&digest[..8])
    }

    pub fn prompt_specs(&self) -> Vec<PromptSpec> {
        if self.prompts.specs.is_empty() {
            standard_prompt_specs(self.seed)
        } else {
            self.prompts.specs.clone()
        }
    }

    pub fn ensemble_members(&self) -> Result<Vec<EnsembleMember>> {
        if self.models.is_empty() {
            return Err(violation("models", "no models configured"));
        }
        if self.members.is_empty() {
            let specs = self.prompt_specs();
            return Ok(self
                .models
                .iter()
                .flat_map(|m| specs.iter().map(move |s| EnsembleMember::new(m.clone(), s.prompt_id.clone())))
                .collect());
        }
        self.members
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let model = self
                    .models
                    .iter()
                    .find(|m| m.model_id == r.model)
                    .ok_or_else(|| violation(format!("members[{i}].model"), format!("unknown model {:?}", r.model)))?;
                Ok(EnsembleMember::new(model.clone(), r.prompt.clone()))
            })
            .collect()
    }

    pub fn mapping_params(&self) -> MappingParams {
        MappingParams {
            hybrid_weight: self.mapping.hybrid_weight,
            threshold: self.mapping.threshold,
        }
    }

    pub fn pipeline_config(&self) -> PipelineConfig {
        PipelineConfig {
            mapping: self.mapping_params(),
            rank: self.rank.clone(),
            combine: self.combine,
        }
    }
}

/// Parses and validates a config document.
pub fn validate_config(raw: &str) -> Result<RunConfig> {
    let cfg = RunConfig::from_toml_str(raw)?;
    cfg.validate()?;
    Ok(cfg)
}

/// Reads a config file, resolves its relative paths against the file's
/// directory and applies environment overrides. Validation is left to the
/// caller so command-line overrides can be applied first.
pub fn load_config(path: impl AsRef<Path>) -> Result<RunConfig> {
    let path = path.as_ref();
    let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut cfg = RunConfig::from_toml_str(&raw)?;
    let base = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    cfg.resolve_paths(base);
    cfg.apply_env(|k| std::env::var(k).ok());
    Ok(cfg)
}
