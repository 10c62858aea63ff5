//! Declarative experiment configuration (TOML).
//!
//! Relative paths are resolved against the directory holding the config
//! file. Environment variables override endpoint base addresses only.
//!
//! ```toml
//! seed = 7
//! workers = 4
//! output_dir = "runs/demo"
//!
//! [[datasets]]
//! name = "musique"
//! path = "data/musique_dev.jsonl"
//! format = "musique"
//!
//! [[retrievers]]
//! kind = "bm25"
//!
//! [[pipelines]]
//! kind = "baseline"
//! k_fixed = 5
//!
//! [[pipelines]]
//! kind = "classifier_llm"
//! first_stage_k = 5
//! structured = true
//!
//! [classifier]
//! mode = "oracle"
//!
//! [generator]
//! mode = "gold_echo"
//!
//! [reranker]
//! mode = "gold_aware"
//! fail_rate = 0.1
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::corpus::{ChunkConfig, DatasetFormat};
use crate::error::{Error, Result};
use crate::evaluation::{AnswerMode, Metric};
use crate::gateway::{
    EndpointConfig, ENV_CLASSIFIER_URL, ENV_EMBEDDER_URL, ENV_GENERATOR_URL, ENV_RERANKER_URL, ENV_SCORER_URL,
};
use crate::pipelines::PipelineKind;

fn default_workers() -> usize {
    4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_workers")]
    pub workers: usize,
    pub output_dir: PathBuf,
    pub datasets: Vec<DatasetConfig>,
    #[serde(default = "default_retrievers")]
    pub retrievers: Vec<RetrieverConfig>,
    #[serde(default)]
    pub pipelines: Vec<PipelineKind>,
    #[serde(default)]
    pub classifier: ClassifierConfig,
    #[serde(default)]
    pub generator: GeneratorConfig,
    #[serde(default)]
    pub reranker: RerankerConfig,
    #[serde(default)]
    pub endpoints: EndpointsConfig,
    #[serde(default)]
    pub evaluation: EvaluationConfig,
    #[serde(default)]
    pub studies: StudiesConfig,
    /// Directory relative paths were resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_retrievers() -> Vec<RetrieverConfig> {
    vec![RetrieverConfig::Bm25 {
        name: None,
        k1: default_k1(),
        b: default_b(),
    }]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    /// Report label; defaults to the format tag.
    #[serde(default)]
    pub name: Option<String>,
    pub path: PathBuf,
    pub format: DatasetFormat,
    #[serde(default)]
    pub chunk_words: Option<usize>,
    #[serde(default)]
    pub overlap_words: Option<usize>,
    /// Keep only the first `limit` queries.
    #[serde(default)]
    pub limit: Option<usize>,
    /// Evaluate only the held-out part of a seeded train/eval split with
    /// this training fraction.
    #[serde(default)]
    pub train_fraction: Option<f64>,
}

impl DatasetConfig {
    pub fn label(&self) -> String {
        self.name.clone().unwrap_or_else(|| self.format.tag().to_string())
    }

    pub fn chunking(&self) -> ChunkConfig {
        let d = ChunkConfig::default();
        ChunkConfig {
            chunk_words: self.chunk_words.unwrap_or(d.chunk_words),
            overlap_words: self.overlap_words.unwrap_or(d.overlap_words),
        }
    }
}

fn default_k1() -> f64 {
    1.2
}
fn default_b() -> f64 {
    0.75
}
fn default_hashed_dim() -> usize {
    64
}
fn default_candidate_k() -> usize {
    50
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueryEncoderMode {
    /// Query vectors looked up by query id in `query_embeddings`.
    Canned,
    Remote,
    /// Signed feature hashing; pairs with hashed passage vectors.
    #[default]
    Hashed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScorerMode {
    Remote,
    #[default]
    TermOverlap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RetrieverConfig {
    Bm25 {
        #[serde(default)]
        name: Option<String>,
        #[serde(default = "default_k1")]
        k1: f64,
        #[serde(default = "default_b")]
        b: f64,
    },
    Dense {
        #[serde(default)]
        name: Option<String>,
        /// Passage vectors; hashed vectors of `hashed_dim` when absent.
        #[serde(default)]
        embeddings: Option<PathBuf>,
        #[serde(default)]
        query_embeddings: Option<PathBuf>,
        #[serde(default)]
        query_encoder: QueryEncoderMode,
        #[serde(default = "default_hashed_dim")]
        hashed_dim: usize,
    },
    TwoStage {
        #[serde(default)]
        name: Option<String>,
        first_stage: Box<RetrieverConfig>,
        #[serde(default = "default_candidate_k")]
        candidate_k: usize,
        #[serde(default)]
        scorer: ScorerMode,
    },
    /// The dataset's own per-query candidate lists.
    Candidates {
        #[serde(default)]
        name: Option<String>,
    },
}

impl RetrieverConfig {
    pub fn label(&self) -> String {
        match self {
            RetrieverConfig::Bm25 { name, .. } => name.clone().unwrap_or_else(|| "BM25".into()),
            RetrieverConfig::Dense { name, .. } => name.clone().unwrap_or_else(|| "Dense".into()),
            RetrieverConfig::TwoStage { name, first_stage, .. } => {
                name.clone().unwrap_or_else(|| format!("{}+Rerank", first_stage.label()))
            }
            RetrieverConfig::Candidates { name } => name.clone().unwrap_or_else(|| "Candidates".into()),
        }
    }

    fn paths_mut(&mut self) -> Vec<&mut PathBuf> {
        match self {
            RetrieverConfig::Dense {
                embeddings,
                query_embeddings,
                ..
            } => embeddings.iter_mut().chain(query_embeddings.iter_mut()).collect(),
            RetrieverConfig::TwoStage { first_stage, .. } => first_stage.paths_mut(),
            _ => Vec::new(),
        }
    }

    fn uses(&self, f: &dyn Fn(&RetrieverConfig) -> bool) -> bool {
        f(self)
            || matches!(self, RetrieverConfig::TwoStage { first_stage, .. } if first_stage.uses(f))
    }

    fn validate(&self) -> Result<()> {
        match self {
            RetrieverConfig::Bm25 { k1, b, .. } => crate::retrieval::Bm25Params::new(*k1, *b).map(|_| ()),
            RetrieverConfig::Dense {
                query_encoder,
                query_embeddings,
                hashed_dim,
                embeddings,
                ..
            } => {
                if *query_encoder == QueryEncoderMode::Canned && query_embeddings.is_none() {
                    return Err(Error::Config("dense retriever: canned encoder needs query_embeddings".into()));
                }
                if embeddings.is_none() && *hashed_dim == 0 {
                    return Err(Error::Config("dense retriever: hashed_dim must be at least 1".into()));
                }
                Ok(())
            }
            RetrieverConfig::TwoStage {
                first_stage,
                candidate_k,
                ..
            } => {
                if *candidate_k == 0 {
                    return Err(Error::Config("two_stage: candidate_k must be at least 1".into()));
                }
                if matches!(**first_stage, RetrieverConfig::TwoStage { .. }) {
                    return Err(Error::Config("two_stage: first stage cannot itself be two-stage".into()));
                }
                first_stage.validate()
            }
            RetrieverConfig::Candidates { .. } => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifierMode {
    #[default]
    Oracle,
    Heuristic,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifierConfig {
    #[serde(default)]
    pub mode: ClassifierMode,
    /// Hop label → k, e.g. `{ "3" = 2 }`.
    #[serde(default)]
    pub label_overrides: BTreeMap<String, usize>,
}

impl ClassifierConfig {
    pub fn overrides(&self) -> Result<BTreeMap<u8, usize>> {
        self.label_overrides
            .iter()
            .map(|(k, v)| {
                let label = k
                    .trim()
                    .trim_end_matches("hop")
                    .parse::<u8>()
                    .map_err(|_| Error::Config(format!("label_overrides: bad label {k:?}")))?;
                Ok((label, *v))
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorMode {
    #[default]
    GoldEcho,
    PositionSensitive,
    Remote,
}

fn default_gen_tokens() -> u32 {
    32
}
fn default_rerank_tokens() -> u32 {
    64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorConfig {
    #[serde(default)]
    pub mode: GeneratorMode,
    #[serde(default)]
    pub template: Option<String>,
    #[serde(default = "default_gen_tokens")]
    pub max_tokens: u32,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            mode: GeneratorMode::default(),
            template: None,
            max_tokens: default_gen_tokens(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RerankerMode {
    Echo,
    #[default]
    GoldAware,
    /// Always replies with `reply`.
    Fixed,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RerankerConfig {
    #[serde(default)]
    pub mode: RerankerMode,
    #[serde(default)]
    pub reply: Option<String>,
    /// Fraction of queries whose rerank reply is replaced by unparseable
    /// prose. Exactly `round(fail_rate * N)` seeded query ids are chosen.
    #[serde(default)]
    pub fail_rate: f64,
    #[serde(default = "default_rerank_tokens")]
    pub max_tokens: u32,
}

impl Default for RerankerConfig {
    fn default() -> Self {
        RerankerConfig {
            mode: RerankerMode::default(),
            reply: None,
            fail_rate: 0.0,
            max_tokens: default_rerank_tokens(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EndpointsConfig {
    #[serde(default)]
    pub generator: Option<EndpointConfig>,
    #[serde(default)]
    pub classifier: Option<EndpointConfig>,
    #[serde(default)]
    pub reranker: Option<EndpointConfig>,
    #[serde(default)]
    pub scorer: Option<EndpointConfig>,
    #[serde(default)]
    pub embedder: Option<EndpointConfig>,
}

impl EndpointsConfig {
    fn slots(&mut self) -> [(&'static str, &'static str, &mut Option<EndpointConfig>); 5] {
        [
            ("generator", ENV_GENERATOR_URL, &mut self.generator),
            ("classifier", ENV_CLASSIFIER_URL, &mut self.classifier),
            ("reranker", ENV_RERANKER_URL, &mut self.reranker),
            ("scorer", ENV_SCORER_URL, &mut self.scorer),
            ("embedder", ENV_EMBEDDER_URL, &mut self.embedder),
        ]
    }

    /// An unset endpoint is created from its variable alone.
    pub fn apply_env(&mut self) {
        for (_, var, slot) in self.slots() {
            match slot {
                Some(cfg) => cfg.apply_env(var),
                None => {
                    if let Ok(url) = std::env::var(var) {
                        if !url.trim().is_empty() {
                            *slot = Some(EndpointConfig::new(url.trim()));
                        }
                    }
                }
            }
        }
    }

    pub fn require(&self, role: &str) -> Result<EndpointConfig> {
        let slot = match role {
            "generator" => &self.generator,
            "classifier" => &self.classifier,
            "reranker" => &self.reranker,
            "scorer" => &self.scorer,
            "embedder" => &self.embedder,
            other => return Err(Error::Config(format!("unknown endpoint role {other}"))),
        };
        slot.clone()
            .ok_or_else(|| Error::Config(format!("remote {role} selected but [endpoints.{role}] is not configured")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluationConfig {
    #[serde(default)]
    pub ttest_metric: Metric,
    #[serde(default)]
    pub answer_mode: AnswerMode,
    /// Pipeline label every other pipeline is tested against; the first
    /// baseline pipeline when unset.
    #[serde(default)]
    pub reference: Option<String>,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        EvaluationConfig {
            ttest_metric: Metric::F1,
            answer_mode: AnswerMode::default(),
            reference: None,
        }
    }
}

fn default_counts() -> Vec<usize> {
    vec![1, 2]
}
fn default_slots() -> usize {
    5
}
fn default_oracle_ks() -> Vec<usize> {
    vec![2, 3, 4, 5]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistractorStudyConfig {
    #[serde(default = "default_counts")]
    pub distractor_counts: Vec<usize>,
}

impl Default for DistractorStudyConfig {
    fn default() -> Self {
        DistractorStudyConfig {
            distractor_counts: default_counts(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PositionStudyConfig {
    #[serde(default = "default_slots")]
    pub total_slots: usize,
}

impl Default for PositionStudyConfig {
    fn default() -> Self {
        PositionStudyConfig {
            total_slots: default_slots(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleStudyConfig {
    #[serde(default = "default_oracle_ks")]
    pub fixed_k: Vec<usize>,
}

impl Default for OracleStudyConfig {
    fn default() -> Self {
        OracleStudyConfig {
            fixed_k: default_oracle_ks(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudiesConfig {
    #[serde(default)]
    pub distractor: Option<DistractorStudyConfig>,
    #[serde(default)]
    pub position: Option<PositionStudyConfig>,
    #[serde(default)]
    pub oracle: Option<OracleStudyConfig>,
}

impl ExperimentConfig {
    /// Parses, resolves relative paths against `base_dir` and applies
    /// endpoint environment overrides. Does not validate.
    pub fn from_toml_str(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.base_dir = base_dir.to_path_buf();
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base_dir.join(&*p);
            }
        };
        resolve(&mut cfg.output_dir);
        for d in &mut cfg.datasets {
            resolve(&mut d.path);
        }
        for r in &mut cfg.retrievers {
            for p in r.paths_mut() {
                resolve(p);
            }
        }
        cfg.endpoints.apply_env();
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_toml_str(&text, &base)
    }

    /// Checks every cross-field rule and that every referenced input file
    /// exists. Nothing is read or written.
    pub fn validate(&self) -> Result<()> {
        let cfg_err = |m: String| Err(Error::Config(m));
        if self.datasets.is_empty() {
            return cfg_err("no [[datasets]] configured".into());
        }
        if self.workers == 0 {
            return cfg_err("workers must be at least 1".into());
        }
        let mut labels = std::collections::HashSet::new();
        for d in &self.datasets {
            if !d.path.is_file() {
                return cfg_err(format!("dataset file {} does not exist", d.path.display()));
            }
            if !labels.insert(d.label()) {
                return cfg_err(format!("duplicate dataset name {}", d.label()));
            }
            let c = d.chunking();
            if c.chunk_words == 0 || c.overlap_words >= c.chunk_words {
                return cfg_err(format!("dataset {}: need 0 <= overlap_words < chunk_words", d.label()));
            }
            if let Some(f) = d.train_fraction {
                if !(f > 0.0 && f < 1.0) {
                    return cfg_err(format!("dataset {}: train_fraction must be in (0, 1)", d.label()));
                }
            }
        }
        let mut names = std::collections::HashSet::new();
        for r in &self.retrievers {
            r.validate()?;
            if !names.insert(r.label()) {
                return cfg_err(format!("duplicate retriever name {}", r.label()));
            }
            for p in r.clone().paths_mut() {
                if !p.is_file() {
                    return cfg_err(format!("embedding file {} does not exist", p.display()));
                }
            }
        }
        let mut seen = std::collections::HashSet::new();
        for p in &self.pipelines {
            p.validate()?;
            if !seen.insert(p.label()) {
                return cfg_err(format!("duplicate pipeline {}", p.label()));
            }
        }
        if let Some(reference) = &self.evaluation.reference {
            if !seen.contains(reference) {
                return cfg_err(format!("evaluation.reference {reference} is not a configured pipeline"));
            }
        }
        if self.pipelines.iter().any(|p| p.needs_retriever()) && self.retrievers.is_empty() {
            return cfg_err("pipelines need a retriever but none is configured".into());
        }
        let overrides = self.classifier.overrides()?;
        crate::gateway::LabelMap::with_overrides(&overrides)?;
        if !(0.0..=1.0).contains(&self.reranker.fail_rate) {
            return cfg_err(format!("reranker.fail_rate {} not in [0, 1]", self.reranker.fail_rate));
        }
        if self.reranker.mode == RerankerMode::Fixed && self.reranker.reply.is_none() {
            return cfg_err("reranker mode fixed needs reply".into());
        }
        if let Some(t) = &self.generator.template {
            crate::gateway::PromptTemplate::new(t.clone())?;
        }
        let mut roles = Vec::new();
        if self.classifier.mode == ClassifierMode::Remote {
            roles.push("classifier");
        }
        if self.generator.mode == GeneratorMode::Remote {
            roles.push("generator");
        }
        if self.reranker.mode == RerankerMode::Remote {
            roles.push("reranker");
        }
        let uses_remote_scorer =
            |r: &RetrieverConfig| matches!(r, RetrieverConfig::TwoStage { scorer: ScorerMode::Remote, .. });
        let uses_remote_embedder = |r: &RetrieverConfig| {
            matches!(r, RetrieverConfig::Dense { query_encoder: QueryEncoderMode::Remote, .. })
        };
        if self.retrievers.iter().any(|r| r.uses(&uses_remote_scorer)) {
            roles.push("scorer");
        }
        if self.retrievers.iter().any(|r| r.uses(&uses_remote_embedder)) {
            roles.push("embedder");
        }
        for role in roles {
            self.endpoints.require(role)?.validate()?;
        }
        if let Some(d) = &self.studies.distractor {
            if d.distractor_counts.is_empty() {
                return cfg_err("studies.distractor.distractor_counts is empty".into());
            }
        }
        if let Some(p) = &self.studies.position {
            if p.total_slots < usize::from(crate::corpus::MAX_HOPS) + 1 {
                return cfg_err(format!(
                    "studies.position.total_slots must be at least {}",
                    crate::corpus::MAX_HOPS + 1
                ));
            }
        }
        if let Some(o) = &self.studies.oracle {
            if o.fixed_k.contains(&0) {
                return cfg_err("studies.oracle.fixed_k entries must be at least 1".into());
            }
        }
        Ok(())
    }
}
