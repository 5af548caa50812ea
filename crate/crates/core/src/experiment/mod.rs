//! Config-driven grids of model × aggregation × post-processing × weight ×
//! layer set, evaluated on every listed task.

mod config;

use std::borrow::Cow;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use ndarray::{concatenate, Array2, Axis};
use rayon::prelude::*;

pub use config::{
    CorpusConfig, DataFormat, ExperimentConfig, ModelConfig, ModelKind, TableFormat, TaskConfig,
    TaskKind, CORPUS_KEY,
};

use crate::aggregate::{aggregate, compute_stats, AggregationSpec, StatsSource, TokenStats};
use crate::error::{Error, Result};
use crate::evaluate::{
    alignment, eval_classification, eval_clustering, eval_sts, iso_score, mean_std, to_csv,
    uniformity, ClassTargets, EvalReport, MetricKind, SoftmaxConfig,
};
use crate::models::{
    build_avg_tables_from, combine, embed_layers, embed_with_table, load_table, load_word2vec,
    StaticTable,
};
use crate::postprocess::PostChain;
use crate::store::{
    open_dump, read_labeled_tsv, read_pair_tsv, EmbeddingTensor, LabeledTextSet, SentencePairSet,
};
use crate::tokenize::{
    classify_tokens, classify_with_stoplist, load_stoplist, random_embed, tokenize_all,
    TokenClassFlags, Vocabulary, STATIC_LAYER,
};

/// Environment variable capping the worker count.
pub const THREADS_ENV: &str = "EMBSHAPE_THREADS";

/// The grid coordinates of one report row. Its text form is the leading
/// part of the row's provenance and is enough to recompute the cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellKey {
    pub model: String,
    pub task: String,
    pub agg: AggregationSpec,
    pub post: PostChain,
    pub weight: Option<f64>,
}

impl fmt::Display for CellKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "model={};task={};agg={};post={}",
            self.model, self.task, self.agg, self.post
        )?;
        if let Some(w) = self.weight {
            write!(f, ";w={w}")?;
        }
        Ok(())
    }
}

impl FromStr for CellKey {
    type Err = Error;

    /// Parses a provenance string; fields other than the key are ignored.
    fn from_str(s: &str) -> Result<Self> {
        let fields: BTreeMap<&str, &str> = s
            .split(';')
            .filter_map(|kv| kv.split_once('='))
            .collect();
        let get = |k: &str| {
            fields
                .get(k)
                .copied()
                .ok_or_else(|| Error::config(format!("provenance lacks `{k}`")))
        };
        Ok(CellKey {
            model: get("model")?.to_string(),
            task: get("task")?.to_string(),
            agg: get("agg")?.parse()?,
            post: get("post")?.parse()?,
            weight: match fields.get("w") {
                Some(w) => Some(
                    w.parse()
                        .map_err(|_| Error::config(format!("bad weight `{w}`")))?,
                ),
                None => None,
            },
        })
    }
}

impl CellKey {
    fn method_label(&self) -> String {
        let mut label = self.agg.method_label();
        if !self.post.0.is_empty() {
            label.push_str(" + ");
            label.push_str(&self.post.to_string());
        }
        label
    }

    fn model_label(&self) -> String {
        match self.weight {
            Some(w) => format!("{} (w={w})", self.model),
            None => self.model.clone(),
        }
    }
}

enum TaskData {
    Pairs(SentencePairSet),
    Labeled(LabeledTextSet),
    Lines(Vec<String>),
}

impl TaskData {
    fn texts(&self) -> &[String] {
        match self {
            TaskData::Pairs(p) => &p.texts,
            TaskData::Labeled(l) => &l.texts,
            TaskData::Lines(l) => l,
        }
    }
}

struct Task {
    config: TaskConfig,
    data: TaskData,
    ids: Vec<Vec<u32>>,
}

struct Corpus {
    tag: String,
    texts: Vec<String>,
    ids: Vec<Vec<u32>>,
    stats: TokenStats,
}

enum Model {
    Dump(BTreeMap<String, std::result::Result<EmbeddingTensor, String>>),
    Random { seeds: Vec<u64>, dim: usize },
    Avg(BTreeMap<i32, std::result::Result<StaticTable, String>>),
    Table(StaticTable),
    Combine { contextual: String, static_model: String },
}

impl Model {
    fn is_static(&self) -> bool {
        matches!(self, Model::Random { .. } | Model::Table(_))
    }
}

/// Texts being embedded: a task or the corpus.
struct Texts<'a> {
    key: &'a str,
    texts: &'a [String],
    ids: &'a [Vec<u32>],
}

/// Everything a grid needs, loaded once.
pub struct Experiment {
    config: ExperimentConfig,
    vocab: Vocabulary,
    stoplist: Option<Vec<String>>,
    corpus: Option<Corpus>,
    tasks: BTreeMap<String, std::result::Result<Task, String>>,
    models: BTreeMap<String, std::result::Result<Model, String>>,
}

fn read_lines(path: &Path, min_chars: usize) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && l.chars().count() >= min_chars)
        .map(String::from)
        .collect())
}

/// Layer list actually used for `model`: static models have one layer.
fn effective_layers(model: &Model, layers: &[i32]) -> Vec<i32> {
    if model.is_static() {
        vec![STATIC_LAYER]
    } else {
        layers.to_vec()
    }
}

impl Experiment {
    /// Validates the config and loads every referenced resource. Failures
    /// of individual tasks or models are kept and surface as error rows.
    pub fn load(config: ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let vocab = match &config.vocab {
            Some(p) => Vocabulary::load(p)?,
            None => Vocabulary::bert_base_uncased(),
        };
        let stoplist = config.stoplist.as_ref().map(load_stoplist).transpose()?;
        let corpus = match &config.corpus {
            None => None,
            Some(c) => {
                let texts = read_lines(&c.texts, 0)?;
                let ids = tokenize_all(&texts, &vocab);
                let stats = compute_stats(&ids, StatsSource::Wiki)?;
                Some(Corpus {
                    tag: c.tag.clone(),
                    texts,
                    ids,
                    stats,
                })
            }
        };
        let min_chars = config.corpus.as_ref().map_or(0, |c| c.min_chars);
        let tasks = config
            .tasks
            .iter()
            .map(|t| {
                let load = || -> Result<Task> {
                    let data = match t.data_format() {
                        DataFormat::Pairs => TaskData::Pairs(read_pair_tsv(&t.path)?),
                        DataFormat::Labeled => TaskData::Labeled(read_labeled_tsv(&t.path)?),
                        DataFormat::Lines => TaskData::Lines(read_lines(&t.path, min_chars)?),
                    };
                    let ids = tokenize_all(data.texts(), &vocab);
                    Ok(Task {
                        config: t.clone(),
                        data,
                        ids,
                    })
                };
                (t.name.clone(), load().map_err(|e| e.to_string()))
            })
            .collect();

        let mut exp = Experiment {
            config,
            vocab,
            stoplist,
            corpus,
            tasks,
            models: BTreeMap::new(),
        };
        let needed = exp.avg_layers_needed()?;
        let models = exp
            .config
            .models
            .iter()
            .map(|m| {
                let model = exp
                    .load_model(m, needed.get(&m.name))
                    .map_err(|e| e.to_string());
                (m.name.clone(), model)
            })
            .collect();
        exp.models = models;
        Ok(exp)
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.config
    }

    fn load_model(&self, m: &ModelConfig, avg_layers: Option<&BTreeSet<i32>>) -> Result<Model> {
        Ok(match &m.kind {
            ModelKind::Dump { dumps } => Model::Dump(
                dumps
                    .iter()
                    .map(|(k, p)| {
                        (k.clone(), crate::store::load_dump(p).map_err(|e| e.to_string()))
                    })
                    .collect(),
            ),
            ModelKind::Random { seeds, dim } => Model::Random {
                seeds: seeds.clone(),
                dim: *dim,
            },
            ModelKind::Avg { corpus_dump } => {
                let reader = open_dump(corpus_dump)?;
                let present: Vec<i32> = reader.layers();
                let wanted: Vec<i32> = avg_layers.into_iter().flatten().copied().collect();
                let (have, missing): (Vec<i32>, Vec<i32>) =
                    wanted.into_iter().partition(|l| present.contains(l));
                let groups: Vec<Vec<i32>> = have.iter().map(|&l| vec![l]).collect();
                let mut tables = BTreeMap::new();
                if !groups.is_empty() {
                    for (l, t) in have.iter().zip(build_avg_tables_from(reader, &groups)?) {
                        tables.insert(*l, Ok(t));
                    }
                }
                for l in missing {
                    tables.insert(l, Err(Error::MissingLayer(l).to_string()));
                }
                Model::Avg(tables)
            }
            ModelKind::Table {
                path,
                format,
                drop_top,
            } => {
                let table = match format {
                    TableFormat::Stt1 => load_table(path)?,
                    TableFormat::Word2vec => load_word2vec(path)?,
                };
                let table = if *drop_top > 0 {
                    table.filter_top_frequent(*drop_top)?
                } else {
                    table
                };
                Model::Table(table)
            }
            ModelKind::Combine {
                contextual,
                static_model,
            } => Model::Combine {
                contextual: contextual.clone(),
                static_model: static_model.clone(),
            },
        })
    }

    /// Layers each averaged model must provide across the whole grid.
    fn avg_layers_needed(&self) -> Result<BTreeMap<String, BTreeSet<i32>>> {
        let mut out: BTreeMap<String, BTreeSet<i32>> = BTreeMap::new();
        let layer_sets = self.layer_sets()?;
        for m in &self.config.models {
            let target = match &m.kind {
                ModelKind::Avg { .. } => m.name.clone(),
                ModelKind::Combine { static_model, .. } => static_model.clone(),
                _ => continue,
            };
            out.entry(target)
                .or_default()
                .extend(layer_sets.iter().flatten().copied());
        }
        Ok(out)
    }

    fn layer_sets(&self) -> Result<Vec<Vec<i32>>> {
        if self.config.layer_sets.is_empty() {
            Ok(self
                .config
                .aggregation_specs()?
                .into_iter()
                .map(|s| s.layers)
                .collect())
        } else {
            Ok(self.config.layer_sets.clone())
        }
    }

    fn model(&self, name: &str) -> Result<&Model> {
        match self.models.get(name) {
            Some(Ok(m)) => Ok(m),
            Some(Err(e)) => Err(Error::config(format!("model `{name}` failed to load: {e}"))),
            None => Err(Error::config(format!("unknown model `{name}`"))),
        }
    }

    fn task(&self, name: &str) -> Result<&Task> {
        match self.tasks.get(name) {
            Some(Ok(t)) => Ok(t),
            Some(Err(e)) => Err(Error::config(format!("task `{name}` failed to load: {e}"))),
            None => Err(Error::config(format!("unknown task `{name}`"))),
        }
    }

    /// Every grid cell in config order, without duplicates.
    pub fn cells(&self) -> Result<Vec<CellKey>> {
        let specs = self.config.aggregation_specs()?;
        let chains = self.config.post_chains()?;
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for m in &self.config.models {
            let is_combine = matches!(m.kind, ModelKind::Combine { .. });
            let weights: Vec<Option<f64>> = if is_combine {
                self.config.weights.iter().map(|&w| Some(w)).collect()
            } else {
                vec![None]
            };
            for t in &self.config.tasks {
                for spec in &specs {
                    let layer_sets = if self.config.layer_sets.is_empty() {
                        vec![spec.layers.clone()]
                    } else {
                        self.config.layer_sets.clone()
                    };
                    for layers in layer_sets {
                        let layers = match self.models.get(&m.name) {
                            Some(Ok(model)) => effective_layers(model, &layers),
                            _ => layers,
                        };
                        let agg = AggregationSpec {
                            layers,
                            ..spec.clone()
                        };
                        for post in &chains {
                            for &weight in &weights {
                                let key = CellKey {
                                    model: m.name.clone(),
                                    task: t.name.clone(),
                                    agg: agg.clone(),
                                    post: post.clone(),
                                    weight,
                                };
                                if seen.insert(key.to_string()) {
                                    out.push(key);
                                }
                            }
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    fn provenance(&self, key: &CellKey, runs: &str) -> String {
        let mut p = key.to_string();
        if let Some(c) = &self.corpus {
            p.push_str(&format!(";corpus={}", c.tag));
        }
        p.push_str(&format!(";k={}", self.config.frequent_k));
        p.push_str(&format!(";{runs}"));
        p
    }

    /// Evaluates one cell; failures become error rows.
    pub fn run_cell(&self, key: &CellKey) -> EvalReport {
        let metric = self
            .config
            .task(&key.task)
            .and_then(|t| t.metric_kind())
            .unwrap_or(MetricKind::Spearman);
        let mut report = match self.try_cell(key) {
            Ok(r) => r,
            Err(e) => {
                let mut r = EvalReport::failed(&key.task, metric, &e);
                r.provenance = self.provenance(key, "runs=0");
                r
            }
        };
        report.model = key.model_label();
        report.method = key.method_label();
        report
    }

    fn try_cell(&self, key: &CellKey) -> Result<EvalReport> {
        let task = self.task(&key.task)?;
        let metric = task.config.metric_kind()?;
        let variants = self.cell_vectors(key, task)?;
        let seeds = &self.config.seeds;
        let mut values = Vec::new();
        let mut inner_runs = 0;
        let mut inner_std = 0.0;
        for vectors in &variants {
            let r = self.score(task, metric, vectors)?;
            inner_runs += r.runs;
            inner_std = r.stddev;
            values.push(r.value);
        }
        let (mean, std) = mean_std(&values);
        let stddev = if values.len() == 1 { inner_std } else { std };
        let runs_note = format!(
            "variants={};seeds={}",
            values.len(),
            seeds.iter().map(u64::to_string).collect::<Vec<_>>().join(",")
        );
        let report = EvalReport {
            stddev,
            runs: inner_runs.max(1),
            seeds: seeds.clone(),
            provenance: self.provenance(key, &runs_note),
            ..EvalReport::single(&key.task, metric, mean)
        };
        report.validate()?;
        Ok(report)
    }

    fn score(&self, task: &Task, metric: MetricKind, x: &Array2<f64>) -> Result<EvalReport> {
        let name = task.config.name.as_str();
        let seeds = &self.config.seeds;
        let softmax = SoftmaxConfig {
            l2: self.config.l2.unwrap_or(SoftmaxConfig::default().l2),
            ..SoftmaxConfig::default()
        };
        let normalize = self.config.normalize_diagnostics;
        match (metric, &task.data) {
            (MetricKind::Spearman, TaskData::Pairs(p)) => eval_sts(name, p, x),
            (MetricKind::ClusterAccuracy, TaskData::Labeled(l)) => {
                eval_clustering(name, &l.labels, x, seeds)
            }
            (MetricKind::ClassifyAccuracy, TaskData::Labeled(l)) => {
                let targets = ClassTargets::hard(&l.labels)?;
                eval_classification(name, &targets, Some(&l.splits), x, &softmax, seeds[0])
            }
            (MetricKind::ClassifyAccuracy, TaskData::Pairs(p)) => {
                let targets = ClassTargets::soft_scores(&p.scores())?;
                let features = pair_features(x);
                eval_classification(name, &targets, None, &features, &softmax, seeds[0])
            }
            (MetricKind::IsoScore, _) => Ok(EvalReport::single(name, metric, iso_score(x)?)),
            (MetricKind::Uniformity, _) => {
                Ok(EvalReport::single(name, metric, uniformity(x, normalize)?))
            }
            (MetricKind::Alignment, TaskData::Pairs(p)) => {
                let positives: Vec<usize> = p
                    .pairs
                    .iter()
                    .enumerate()
                    .filter(|(_, s)| s.score == 5.0)
                    .map(|(i, _)| i)
                    .collect();
                let a = x.select(Axis(0), &positives.iter().map(|i| 2 * i).collect::<Vec<_>>());
                let b = x.select(Axis(0), &positives.iter().map(|i| 2 * i + 1).collect::<Vec<_>>());
                Ok(EvalReport::single(name, metric, alignment(&a, &b, normalize)?))
            }
            (m, _) => Err(Error::config(format!(
                "metric {m} does not fit the data format of task `{name}`"
            ))),
        }
    }

    /// Post-processed sentence vectors of the task, one matrix per model
    /// variant (random seeds).
    fn cell_vectors(&self, key: &CellKey, task: &Task) -> Result<Vec<Array2<f64>>> {
        let target = Texts {
            key: &task.config.name,
            texts: task.data.texts(),
            ids: &task.ids,
        };
        let needs_corpus = key.post.needs_corpus();
        let corpus = match (&self.corpus, needs_corpus) {
            (Some(c), true) => Some(Texts {
                key: CORPUS_KEY,
                texts: &c.texts,
                ids: &c.ids,
            }),
            (None, true) => return Err(Error::config("no corpus configured")),
            _ => None,
        };
        let targets = self.model_vectors(&key.model, &target, &target, key)?;
        let corpora = match &corpus {
            Some(c) => Some(self.model_vectors(&key.model, c, &target, key)?),
            None => None,
        };
        let tag = self.corpus.as_ref().map_or("", |c| c.tag.as_str());
        targets
            .iter()
            .enumerate()
            .map(|(i, t)| {
                let c = corpora.as_ref().map(|c| (&c[i], tag));
                key.post.run(t, c)
            })
            .collect()
    }

    /// Aggregated (not yet post-processed) vectors of `texts` under the
    /// cell's model. `stats_texts` decides the target-side statistics.
    fn model_vectors(
        &self,
        name: &str,
        texts: &Texts<'_>,
        stats_texts: &Texts<'_>,
        key: &CellKey,
    ) -> Result<Vec<Array2<f64>>> {
        let model = self.model(name)?;
        if let Model::Combine {
            contextual,
            static_model,
        } = model
        {
            let w = key
                .weight
                .ok_or_else(|| Error::config("combined model cell lacks a weight"))?;
            let a = self.model_vectors(contextual, texts, stats_texts, key)?;
            let b = self.model_vectors(static_model, texts, stats_texts, key)?;
            if b.len() != 1 && a.len() != 1 && a.len() != b.len() {
                return Err(Error::config("combined sides have different variant counts"));
            }
            let n = a.len().max(b.len());
            return (0..n)
                .map(|i| combine(&a[i.min(a.len() - 1)], &b[i.min(b.len() - 1)], w))
                .collect();
        }
        let spec = AggregationSpec {
            layers: effective_layers(model, &key.agg.layers),
            ..key.agg.clone()
        };
        let word_table = match model {
            Model::Table(t) if t.is_word_level() => Some(t),
            _ => None,
        };
        let word_ids = |tx: &Texts<'_>| -> Vec<Vec<u32>> {
            let t = word_table.expect("word-level table");
            tx.texts.par_iter().map(|s| t.word_ids(s)).collect()
        };

        let tensors = self.tensors(model, texts, &spec.layers)?;
        // target-side statistics come from the sequences the model embeds
        let target_ids: Vec<Vec<u32>> = match model {
            Model::Dump(dumps) => Self::dump_for(dumps, stats_texts)?
                .token_ids()
                .map(<[u32]>::to_vec)
                .collect(),
            _ if word_table.is_some() => word_ids(stats_texts),
            _ => stats_texts.ids.to_vec(),
        };
        let target_stats = compute_stats(&target_ids, StatsSource::Target)?;
        let wiki_stats = match (&self.corpus, word_table) {
            (Some(c), None) => Some(c.stats.clone()),
            (Some(c), Some(_)) => Some(compute_stats(
                word_ids(&Texts {
                    key: CORPUS_KEY,
                    texts: &c.texts,
                    ids: &c.ids,
                }),
                StatsSource::Wiki,
            )?),
            (None, _) => None,
        };
        let stats = match spec.stats_source() {
            Some(StatsSource::Wiki) => Some(
                wiki_stats
                    .as_ref()
                    .ok_or_else(|| Error::config("idf:W needs a corpus"))?,
            ),
            Some(StatsSource::Target) => Some(&target_stats),
            None => None,
        };
        let frequency = wiki_stats.as_ref().unwrap_or(&target_stats);
        let flags = match word_table {
            Some(t) => TokenClassFlags::for_words(
                t.words().expect("word-level"),
                frequency,
                self.config.frequent_k.min(t.len()),
            )?,
            None => match &self.stoplist {
                Some(list) => classify_with_stoplist(&self.vocab, list),
                None => classify_tokens(&self.vocab, frequency, self.config.frequent_k)?,
            },
        };
        tensors
            .iter()
            .map(|t| Ok(aggregate(t, &spec, stats, &flags)?.vectors))
            .collect()
    }

    fn dump_for<'m>(
        dumps: &'m BTreeMap<String, std::result::Result<EmbeddingTensor, String>>,
        texts: &Texts<'_>,
    ) -> Result<&'m EmbeddingTensor> {
        let tensor = match dumps.get(texts.key) {
            Some(Ok(t)) => t,
            Some(Err(e)) => return Err(Error::config(format!("dump failed to load: {e}"))),
            None => return Err(Error::config(format!("no dump for `{}`", texts.key))),
        };
        if tensor.sentence_count() != texts.texts.len() {
            return Err(Error::invalid(format!(
                "dump for `{}` holds {} sentences, data has {}",
                texts.key,
                tensor.sentence_count(),
                texts.texts.len()
            )));
        }
        Ok(tensor)
    }

    /// Token-level tensors of `texts` for a non-combined model.
    fn tensors<'m>(
        &self,
        model: &'m Model,
        texts: &Texts<'_>,
        layers: &[i32],
    ) -> Result<Vec<Cow<'m, EmbeddingTensor>>> {
        match model {
            Model::Dump(dumps) => Ok(vec![Cow::Borrowed(Self::dump_for(dumps, texts)?)]),
            Model::Random { seeds, dim } => seeds
                .iter()
                .map(|&s| random_embed(texts.texts, texts.ids, s, *dim).map(Cow::Owned))
                .collect(),
            Model::Table(table) => {
                let out = if table.is_word_level() {
                    crate::models::embed_words(texts.texts, table)?
                } else {
                    embed_with_table(texts.texts, texts.ids, table)?
                };
                Ok(vec![Cow::Owned(out.tensor)])
            }
            Model::Avg(tables) => {
                let picked = layers
                    .iter()
                    .map(|l| match tables.get(l) {
                        Some(Ok(t)) => Ok((*l, t)),
                        Some(Err(e)) => Err(Error::config(e.clone())),
                        None => Err(Error::MissingLayer(*l)),
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(vec![Cow::Owned(embed_layers(texts.texts, texts.ids, &picked)?.tensor)])
            }
            Model::Combine { .. } => Err(Error::config("combined models have no token tensor")),
        }
    }

    /// Runs every cell in parallel (up to the worker cap) and returns the
    /// reports in grid order.
    pub fn run(&self) -> Result<Vec<EvalReport>> {
        let cells = self.cells()?;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(worker_count(self.config.threads))
            .build()
            .map_err(|e| Error::config(format!("thread pool: {e}")))?;
        Ok(pool.install(|| cells.par_iter().map(|c| self.run_cell(c)).collect()))
    }
}

/// `[|u − v|, u ∘ v]` per pair, for classifiers over sentence pairs.
pub fn pair_features(x: &Array2<f64>) -> Array2<f64> {
    let n = x.nrows() / 2;
    let even: Vec<usize> = (0..n).map(|i| 2 * i).collect();
    let odd: Vec<usize> = (0..n).map(|i| 2 * i + 1).collect();
    let u = x.select(Axis(0), &even);
    let v = x.select(Axis(0), &odd);
    let diff = (&u - &v).mapv(f64::abs);
    let prod = &u * &v;
    concatenate(Axis(1), &[diff.view(), prod.view()]).expect("same row count")
}

/// Worker count: the environment cap wins, then the config, then all cores.
pub fn worker_count(config_threads: Option<usize>) -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.parse().ok())
        .or(config_threads)
        .filter(|&n| n > 0)
        .unwrap_or_else(rayon::current_num_threads)
}

/// Loads, runs and writes the CSV to the configured output, if any.
pub fn run(config: ExperimentConfig) -> Result<Vec<EvalReport>> {
    let output = config.output.clone();
    let exp = Experiment::load(config)?;
    let reports = exp.run()?;
    if let Some(path) = output {
        let csv = to_csv(&reports)?;
        std::fs::write(&path, csv).map_err(|e| Error::file(&path, e))?;
    }
    Ok(reports)
}

/// Recomputes the cell named by a report's provenance.
pub fn regenerate(exp: &Experiment, provenance: &str) -> Result<EvalReport> {
    let key: CellKey = provenance.parse()?;
    Ok(exp.run_cell(&key))
}
