//! Python bindings. Matrices cross the boundary as lists of rows.

use ndarray::Array2;
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

use embshape_core::aggregate::{aggregate, compute_stats, AggregationSpec, StatsSource};
use embshape_core::evaluate::{self, to_csv, MetricKind};
use embshape_core::experiment::{self, ExperimentConfig};
use embshape_core::models::{self, StaticTable};
use embshape_core::postprocess::{self, PostChain, TransformKind};
use embshape_core::store;
use embshape_core::tokenize::{self, classify_tokens, classify_without_frequency};
use embshape_core::Error;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io { .. } | Error::File { .. } => PyIOError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn to_array(rows: Vec<Vec<f64>>) -> PyResult<Array2<f64>> {
    let n = rows.len();
    let d = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != d) {
        return Err(PyValueError::new_err("rows have different lengths"));
    }
    Array2::from_shape_vec((n, d), rows.into_iter().flatten().collect())
        .map_err(|e| PyValueError::new_err(e.to_string()))
}

fn to_rows(x: &Array2<f64>) -> Vec<Vec<f64>> {
    x.rows().into_iter().map(|r| r.to_vec()).collect()
}

/// WordPiece vocabulary.
#[pyclass(frozen)]
struct Vocabulary {
    inner: tokenize::Vocabulary,
}

#[pymethods]
impl Vocabulary {
    /// The bundled uncased vocabulary.
    #[staticmethod]
    fn bundled() -> Self {
        Vocabulary {
            inner: tokenize::Vocabulary::bert_base_uncased(),
        }
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(Vocabulary {
            inner: tokenize::Vocabulary::load(path).map_err(py_err)?,
        })
    }

    fn tokenize(&self, text: &str) -> PyResult<Vec<u32>> {
        tokenize::tokenize(text, &self.inner).map_err(py_err)
    }

    /// Token ids wrapped in `[CLS] … [SEP]` when `wrap` is set.
    #[pyo3(signature = (text, wrap = true))]
    fn encode(&self, text: &str, wrap: bool) -> PyResult<Vec<u32>> {
        tokenize::encode(text, &self.inner, wrap).map_err(py_err)
    }

    fn token(&self, id: u32) -> Option<String> {
        self.inner.token(id).map(String::from)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }
}

/// A TED1 dump held in memory.
#[pyclass(frozen)]
struct Dump {
    inner: store::EmbeddingTensor,
}

#[pymethods]
impl Dump {
    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(Dump {
            inner: store::load_dump(path).map_err(py_err)?,
        })
    }

    /// Random token vectors for `texts` (a single static layer).
    #[staticmethod]
    #[pyo3(signature = (texts, seed, dim = 768, vocab = None))]
    fn random(texts: Vec<String>, seed: u64, dim: usize, vocab: Option<&Vocabulary>) -> PyResult<Self> {
        let bundled;
        let vocab = match vocab {
            Some(v) => &v.inner,
            None => {
                bundled = tokenize::Vocabulary::bert_base_uncased();
                &bundled
            }
        };
        let ids = tokenize::tokenize_all(&texts, vocab);
        Ok(Dump {
            inner: tokenize::random_embed(&texts, &ids, seed, dim).map_err(py_err)?,
        })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        store::save_dump(&self.inner, path).map_err(py_err)
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn layers(&self) -> Vec<i32> {
        self.inner.layers().to_vec()
    }

    #[getter]
    fn texts(&self) -> Vec<String> {
        self.inner.sentences().iter().map(|s| s.text.clone()).collect()
    }

    fn token_ids(&self, index: usize) -> PyResult<Vec<u32>> {
        self.inner
            .sentences()
            .get(index)
            .map(|s| s.token_ids.clone())
            .ok_or_else(|| PyValueError::new_err(format!("no sentence {index}")))
    }

    fn __len__(&self) -> usize {
        self.inner.sentence_count()
    }

    /// Sentence vectors for an aggregation such as `idf:T+biases@1,12`.
    /// `idf:T` counts document frequencies over this dump; bias removal
    /// marks the `frequent_k` most frequent of them.
    #[pyo3(signature = (spec, vocab = None, frequent_k = 33))]
    fn aggregate(&self, spec: &str, vocab: Option<&Vocabulary>, frequent_k: usize) -> PyResult<Vec<Vec<f64>>> {
        let spec: AggregationSpec = spec.parse().map_err(py_err)?;
        let vocab = vocab.map_or_else(tokenize::Vocabulary::bert_base_uncased, |v| v.inner.clone());
        let stats = compute_stats(self.inner.token_ids(), StatsSource::Target).map_err(py_err)?;
        if spec.stats_source() == Some(StatsSource::Wiki) {
            return Err(PyValueError::new_err("idf:W needs corpus statistics; use run_experiment"));
        }
        let flags = if spec.remove_biases {
            classify_tokens(&vocab, &stats, frequent_k).map_err(py_err)?
        } else {
            classify_without_frequency(&vocab)
        };
        let out = aggregate(&self.inner, &spec, Some(&stats), &flags).map_err(py_err)?;
        Ok(to_rows(&out.vectors))
    }
}

/// A static token table (STT1 or word2vec text).
#[pyclass(frozen)]
struct Table {
    inner: StaticTable,
}

#[pymethods]
impl Table {
    /// Averages every token's vectors over the listed layers of a dump file.
    #[staticmethod]
    fn build_avg(dump_path: &str, layers: Vec<i32>) -> PyResult<Self> {
        let reader = store::open_dump(dump_path).map_err(py_err)?;
        let mut tables = models::build_avg_tables_from(reader, &[layers]).map_err(py_err)?;
        Ok(Table {
            inner: tables.pop().expect("one group"),
        })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(Table {
            inner: models::load_table(path).map_err(py_err)?,
        })
    }

    #[staticmethod]
    fn load_word2vec(path: &str) -> PyResult<Self> {
        Ok(Table {
            inner: models::load_word2vec(path).map_err(py_err)?,
        })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        models::save_table(&self.inner, path).map_err(py_err)
    }

    /// Drops the `m` most frequent entries.
    fn filter_top_frequent(&self, m: usize) -> PyResult<Self> {
        Ok(Table {
            inner: self.inner.filter_top_frequent(m).map_err(py_err)?,
        })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn vector(&self, id: u32) -> Option<Vec<f32>> {
        self.inner.vector(id).map(|v| v.to_vec())
    }

    fn count(&self, id: u32) -> Option<u64> {
        self.inner.count(id)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __contains__(&self, id: u32) -> bool {
        self.inner.contains(id)
    }
}

/// A post-processing step fitted on one matrix.
#[pyclass(frozen)]
struct Transform {
    inner: postprocess::Transform,
}

#[pymethods]
impl Transform {
    /// `kind` is one of center, zscore, quantile_u, whiten, abttK, normalize.
    #[staticmethod]
    fn fit(kind: &str, x: Vec<Vec<f64>>) -> PyResult<Self> {
        let kind: TransformKind = kind.parse().map_err(py_err)?;
        Ok(Transform {
            inner: postprocess::Transform::fit(kind, &to_array(x)?).map_err(py_err)?,
        })
    }

    fn apply(&self, x: Vec<Vec<f64>>) -> PyResult<Vec<Vec<f64>>> {
        Ok(to_rows(&self.inner.apply(&to_array(x)?).map_err(py_err)?))
    }

    #[getter]
    fn kind(&self) -> String {
        self.inner.kind().to_string()
    }

    fn __repr__(&self) -> String {
        format!("Transform({}, dim={})", self.inner.kind(), self.inner.dim())
    }
}

/// Runs a chain like `quantile_u^W>normalize`; `^W` steps fit on `corpus`.
#[pyfunction]
#[pyo3(signature = (chain, x, corpus = None))]
fn post_process(chain: &str, x: Vec<Vec<f64>>, corpus: Option<Vec<Vec<f64>>>) -> PyResult<Vec<Vec<f64>>> {
    let chain: PostChain = chain.parse().map_err(py_err)?;
    let corpus = corpus.map(to_array).transpose()?;
    let out = chain
        .run(&to_array(x)?, corpus.as_ref().map(|c| (c, "W")))
        .map_err(py_err)?;
    Ok(to_rows(&out))
}

#[pyfunction]
fn combine(a: Vec<Vec<f64>>, b: Vec<Vec<f64>>, w: f64) -> PyResult<Vec<Vec<f64>>> {
    Ok(to_rows(&models::combine(&to_array(a)?, &to_array(b)?, w).map_err(py_err)?))
}

#[pyfunction]
fn spearman(x: Vec<f64>, y: Vec<f64>) -> PyResult<f64> {
    evaluate::spearman(&x, &y).map_err(py_err)
}

/// Spearman correlation of gold scores with the cosine of rows `2i`, `2i+1`.
#[pyfunction]
fn sts_spearman(scores: Vec<f64>, x: Vec<Vec<f64>>) -> PyResult<f64> {
    let sims = evaluate::pair_cosines(&to_array(x)?).map_err(py_err)?;
    evaluate::spearman(&scores, &sims).map_err(py_err)
}

#[pyfunction]
fn kmeans(x: Vec<Vec<f64>>, k: usize, seed: u64) -> PyResult<Vec<usize>> {
    evaluate::kmeans(&to_array(x)?, k, seed).map_err(py_err)
}

#[pyfunction]
fn hungarian_accuracy(pred: Vec<usize>, gold: Vec<usize>) -> PyResult<f64> {
    evaluate::hungarian_accuracy(&pred, &gold).map_err(py_err)
}

#[pyfunction]
fn iso_score(x: Vec<Vec<f64>>) -> PyResult<f64> {
    evaluate::iso_score(&to_array(x)?).map_err(py_err)
}

#[pyfunction]
#[pyo3(signature = (a, b, normalize = true))]
fn alignment(a: Vec<Vec<f64>>, b: Vec<Vec<f64>>, normalize: bool) -> PyResult<f64> {
    evaluate::alignment(&to_array(a)?, &to_array(b)?, normalize).map_err(py_err)
}

#[pyfunction]
#[pyo3(signature = (x, normalize = true))]
fn uniformity(x: Vec<Vec<f64>>, normalize: bool) -> PyResult<f64> {
    evaluate::uniformity(&to_array(x)?, normalize).map_err(py_err)
}

/// Runs an experiment from its JSON config text and returns the CSV report.
/// Relative paths resolve against `base_dir` when given.
#[pyfunction]
#[pyo3(signature = (config_json, base_dir = None))]
fn run_experiment(py: Python<'_>, config_json: &str, base_dir: Option<&str>) -> PyResult<String> {
    let mut config = ExperimentConfig::from_json(config_json).map_err(py_err)?;
    if let Some(dir) = base_dir {
        config.resolve_paths(std::path::Path::new(dir));
    }
    let reports = py.detach(|| experiment::run(config)).map_err(py_err)?;
    to_csv(&reports).map_err(py_err)
}

/// Names accepted by the metric fields of a config.
#[pyfunction]
fn metric_names() -> Vec<&'static str> {
    [
        MetricKind::Spearman,
        MetricKind::ClusterAccuracy,
        MetricKind::ClassifyAccuracy,
        MetricKind::IsoScore,
        MetricKind::Alignment,
        MetricKind::Uniformity,
    ]
    .iter()
    .map(|m| m.name())
    .collect()
}

#[pymodule]
fn embshape(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Vocabulary>()?;
    m.add_class::<Dump>()?;
    m.add_class::<Table>()?;
    m.add_class::<Transform>()?;
    m.add_function(wrap_pyfunction!(post_process, m)?)?;
    m.add_function(wrap_pyfunction!(combine, m)?)?;
    m.add_function(wrap_pyfunction!(spearman, m)?)?;
    m.add_function(wrap_pyfunction!(sts_spearman, m)?)?;
    m.add_function(wrap_pyfunction!(kmeans, m)?)?;
    m.add_function(wrap_pyfunction!(hungarian_accuracy, m)?)?;
    m.add_function(wrap_pyfunction!(iso_score, m)?)?;
    m.add_function(wrap_pyfunction!(alignment, m)?)?;
    m.add_function(wrap_pyfunction!(uniformity, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(metric_names, m)?)?;
    Ok(())
}
