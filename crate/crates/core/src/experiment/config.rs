use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::aggregate::AggregationSpec;
use crate::error::{Error, Result};
use crate::evaluate::MetricKind;
use crate::postprocess::PostChain;
use crate::tokenize::DEFAULT_FREQUENT_K;

/// Key under which dump models list their corpus dump.
pub const CORPUS_KEY: &str = "corpus";

fn default_seeds() -> Vec<u64> {
    (0..10).collect()
}

fn default_k() -> usize {
    DEFAULT_FREQUENT_K
}

fn default_post() -> Vec<String> {
    vec!["none".into()]
}

fn default_true() -> bool {
    true
}

fn default_tag() -> String {
    "W".into()
}

fn default_min_chars() -> usize {
    10
}

fn default_dim() -> usize {
    768
}

/// A JSON experiment grid. Relative paths resolve against the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// WordPiece vocabulary; the bundled uncased one when absent.
    #[serde(default)]
    pub vocab: Option<PathBuf>,
    #[serde(default)]
    pub corpus: Option<CorpusConfig>,
    pub models: Vec<ModelConfig>,
    pub tasks: Vec<TaskConfig>,
    pub aggregations: Vec<String>,
    #[serde(default = "default_post")]
    pub post: Vec<String>,
    /// Mixing weights; only combined models expand over this grid.
    #[serde(default)]
    pub weights: Vec<f64>,
    /// Replaces the layer list of every aggregation when non-empty.
    #[serde(default)]
    pub layer_sets: Vec<Vec<i32>>,
    /// Seeds for k-means runs and cross-validation shuffles.
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_k")]
    pub frequent_k: usize,
    /// Explicit frequent-token list replacing the df ranking.
    #[serde(default)]
    pub stoplist: Option<PathBuf>,
    #[serde(default)]
    pub l2: Option<f64>,
    /// L2-normalize vectors before alignment and uniformity.
    #[serde(default = "default_true")]
    pub normalize_diagnostics: bool,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub threads: Option<usize>,
}

/// External text corpus for idf statistics, frequent tokens and corpus-fitted
/// post-processing. One sentence per line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusConfig {
    pub texts: PathBuf,
    #[serde(default = "default_tag")]
    pub tag: String,
    /// Lines shorter than this are dropped from diagnostic sets.
    #[serde(default = "default_min_chars")]
    pub min_chars: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub name: String,
    #[serde(flatten)]
    pub kind: ModelKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelKind {
    /// Extracted contextual vectors, one TED1 file per task name (plus
    /// `corpus` for corpus-fitted steps).
    Dump { dumps: BTreeMap<String, PathBuf> },
    /// Random token vectors; results average over the seeds.
    Random {
        seeds: Vec<u64>,
        #[serde(default = "default_dim")]
        dim: usize,
    },
    /// Per-layer token averages over a corpus dump.
    Avg { corpus_dump: PathBuf },
    /// A static table file.
    Table {
        path: PathBuf,
        format: TableFormat,
        #[serde(default)]
        drop_top: usize,
    },
    /// Mix of a contextual model and a static one, expanded over `weights`.
    Combine {
        contextual: String,
        #[serde(rename = "static")]
        static_model: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TableFormat {
    Stt1,
    Word2vec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Sts,
    Cluster,
    Classify,
    Diag,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataFormat {
    /// `score \t text_a \t text_b [\t tag]`
    Pairs,
    /// `text \t label [\t split]`
    Labeled,
    /// One text per line.
    Lines,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskConfig {
    pub name: String,
    pub kind: TaskKind,
    pub path: PathBuf,
    #[serde(default)]
    pub format: Option<DataFormat>,
    /// Diagnostic metric (`isoscore`, `alignment`, `uniformity`).
    #[serde(default)]
    pub metric: Option<String>,
}

impl TaskConfig {
    pub fn data_format(&self) -> DataFormat {
        self.format.unwrap_or(match self.kind {
            TaskKind::Sts | TaskKind::Diag => DataFormat::Pairs,
            TaskKind::Cluster | TaskKind::Classify => DataFormat::Labeled,
        })
    }

    pub fn metric_kind(&self) -> Result<MetricKind> {
        match self.kind {
            TaskKind::Sts => Ok(MetricKind::Spearman),
            TaskKind::Cluster => Ok(MetricKind::ClusterAccuracy),
            TaskKind::Classify => Ok(MetricKind::ClassifyAccuracy),
            TaskKind::Diag => self
                .metric
                .as_deref()
                .ok_or_else(|| Error::config(format!("diagnostic task `{}` needs a metric", self.name)))?
                .parse(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::config(format!("bad config: {e}")))
    }

    /// Loads a config and resolves its relative paths against the file's
    /// directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
        let mut config = Self::from_json(&text)?;
        if let Some(base) = path.parent() {
            config.resolve_paths(base);
        }
        Ok(config)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(v) = self.vocab.as_mut() {
            fix(v);
        }
        if let Some(s) = self.stoplist.as_mut() {
            fix(s);
        }
        if let Some(o) = self.output.as_mut() {
            fix(o);
        }
        if let Some(c) = self.corpus.as_mut() {
            fix(&mut c.texts);
        }
        for t in &mut self.tasks {
            fix(&mut t.path);
        }
        for m in &mut self.models {
            match &mut m.kind {
                ModelKind::Dump { dumps } => dumps.values_mut().for_each(fix),
                ModelKind::Avg { corpus_dump } => fix(corpus_dump),
                ModelKind::Table { path, .. } => fix(path),
                ModelKind::Random { .. } | ModelKind::Combine { .. } => {}
            }
        }
    }

    pub fn model(&self, name: &str) -> Result<&ModelConfig> {
        self.models
            .iter()
            .find(|m| m.name == name)
            .ok_or_else(|| Error::config(format!("unknown model `{name}`")))
    }

    pub fn task(&self, name: &str) -> Result<&TaskConfig> {
        self.tasks
            .iter()
            .find(|t| t.name == name)
            .ok_or_else(|| Error::config(format!("unknown task `{name}`")))
    }

    pub fn aggregation_specs(&self) -> Result<Vec<AggregationSpec>> {
        self.aggregations.iter().map(|a| a.parse()).collect()
    }

    pub fn post_chains(&self) -> Result<Vec<PostChain>> {
        self.post.iter().map(|p| p.parse()).collect()
    }

    /// Checks grids, names, references and that every path exists.
    pub fn validate(&self) -> Result<()> {
        if self.models.is_empty() || self.tasks.is_empty() || self.aggregations.is_empty() {
            return Err(Error::config("models, tasks and aggregations must be non-empty"));
        }
        if self.post.is_empty() || self.seeds.is_empty() {
            return Err(Error::config("post and seeds grids must be non-empty"));
        }
        let mut names: Vec<&str> = self.models.iter().map(|m| m.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::config("model names must be unique"));
        }
        let mut tasks: Vec<&str> = self.tasks.iter().map(|t| t.name.as_str()).collect();
        tasks.sort_unstable();
        if tasks.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::config("task names must be unique"));
        }
        for name in names.iter().chain(&tasks) {
            if name.contains([';', '=']) {
                return Err(Error::config(format!("name `{name}` may not contain ';' or '='")));
            }
        }
        self.aggregation_specs()?;
        let chains = self.post_chains()?;
        if chains.iter().any(PostChain::needs_corpus) && self.corpus.is_none() {
            return Err(Error::config("corpus-fitted post-processing needs a corpus"));
        }
        if self.layer_sets.iter().any(Vec::is_empty) {
            return Err(Error::config("layer sets must be non-empty"));
        }
        if let Some(w) = self.weights.iter().find(|w| !w.is_finite()) {
            return Err(Error::config(format!("weight {w} is not finite")));
        }
        for t in &self.tasks {
            t.metric_kind()?;
        }

        for m in &self.models {
            match &m.kind {
                ModelKind::Random { seeds, dim } => {
                    if seeds.is_empty() || *dim == 0 {
                        return Err(Error::config(format!(
                            "random model `{}` needs seeds and a positive dim",
                            m.name
                        )));
                    }
                }
                ModelKind::Avg { .. } | ModelKind::Table { .. } => {}
                ModelKind::Dump { dumps } => {
                    for t in &self.tasks {
                        if !dumps.contains_key(&t.name) {
                            log::warn!("model `{}` has no dump for task `{}`", m.name, t.name);
                        }
                    }
                }
                ModelKind::Combine {
                    contextual,
                    static_model,
                } => {
                    if self.weights.is_empty() {
                        return Err(Error::config("combined models need a weight grid"));
                    }
                    for side in [contextual, static_model] {
                        if matches!(self.model(side)?.kind, ModelKind::Combine { .. }) {
                            return Err(Error::config("combined models cannot nest"));
                        }
                    }
                }
            }
        }
        for p in self.paths() {
            if !p.exists() {
                return Err(Error::config(format!("path {} does not exist", p.display())));
            }
        }
        Ok(())
    }

    fn paths(&self) -> Vec<&Path> {
        let mut out: Vec<&Path> = Vec::new();
        out.extend(self.vocab.as_deref());
        out.extend(self.stoplist.as_deref());
        out.extend(self.corpus.as_ref().map(|c| c.texts.as_path()));
        out.extend(self.tasks.iter().map(|t| t.path.as_path()));
        for m in &self.models {
            match &m.kind {
                ModelKind::Dump { dumps } => out.extend(dumps.values().map(PathBuf::as_path)),
                ModelKind::Avg { corpus_dump } => out.push(corpus_dump),
                ModelKind::Table { path, .. } => out.push(path),
                _ => {}
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_minimal_config() {
        let c = ExperimentConfig::from_json(
            r#"{
                "vocab": "v.txt",
                "models": [{"name": "RE", "kind": "random", "seeds": [0, 1]}],
                "tasks": [{"name": "stsb", "kind": "sts", "path": "stsb.tsv"}],
                "aggregations": ["avg@-1"]
            }"#,
        )
        .unwrap();
        assert_eq!(c.seeds.len(), 10);
        assert_eq!(c.post, vec!["none"]);
        assert!(matches!(c.models[0].kind, ModelKind::Random { dim: 768, .. }));
        assert_eq!(ExperimentConfig::from_json(&c.to_json()).unwrap(), c);
    }

    #[test]
    fn unknown_fields_rejected() {
        assert!(ExperimentConfig::from_json(r#"{"models": [], "tasks": [], "aggregations": [], "bogus": 1}"#).is_err());
    }

    #[test]
    fn missing_paths_rejected() {
        let c = ExperimentConfig::from_json(
            r#"{
                "models": [{"name": "B", "kind": "dump", "dumps": {"t": "/nonexistent.ted"}}],
                "tasks": [{"name": "t", "kind": "sts", "path": "/nonexistent.tsv"}],
                "aggregations": ["avg@1"]
            }"#,
        )
        .unwrap();
        assert!(matches!(c.validate(), Err(Error::Config(_))));
    }
}
