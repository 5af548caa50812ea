//! Sentence vectors from token vectors: idf weighting, bias removal, mask
//! selection and averaging over a set of layers.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::store::EmbeddingTensor;
use crate::tokenize::TokenClassFlags;

/// Corpus a [`TokenStats`] was counted on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StatsSource {
    /// External reference corpus (Wikitext-2 by default).
    Wiki,
    /// All samples of the task being evaluated.
    Target,
}

impl StatsSource {
    pub fn tag(self) -> &'static str {
        match self {
            StatsSource::Wiki => "W",
            StatsSource::Target => "T",
        }
    }
}

impl FromStr for StatsSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "W" | "w" => Ok(StatsSource::Wiki),
            "T" | "t" => Ok(StatsSource::Target),
            other => Err(Error::config(format!("unknown stats source `{other}`"))),
        }
    }
}

/// Document frequencies over a corpus of token-id sequences.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenStats {
    documents: usize,
    df: Vec<u32>,
    source: StatsSource,
}

impl TokenStats {
    pub fn documents(&self) -> usize {
        self.documents
    }

    pub fn source(&self) -> StatsSource {
        self.source
    }

    pub fn df(&self, id: u32) -> u32 {
        self.df.get(id as usize).copied().unwrap_or(0)
    }

    /// `ln(N / df)`; tokens unseen in the corpus are treated as `df = 1`.
    pub fn idf(&self, id: u32) -> f64 {
        let df = self.df(id).max(1) as f64;
        (self.documents as f64 / df).ln()
    }

    pub fn idf_with_base(&self, id: u32, base: f64) -> f64 {
        self.idf(id) / base.ln()
    }
}

pub fn compute_stats<I, S>(corpus: I, source: StatsSource) -> Result<TokenStats>
where
    I: IntoIterator<Item = S>,
    S: AsRef<[u32]>,
{
    let mut df: Vec<u32> = Vec::new();
    let mut seen: Vec<usize> = Vec::new();
    let mut documents = 0usize;
    for doc in corpus {
        documents += 1;
        for &id in doc.as_ref() {
            let i = id as usize;
            if i >= df.len() {
                df.resize(i + 1, 0);
                seen.resize(i + 1, 0);
            }
            // `seen` holds the 1-based index of the last document containing the id
            if seen[i] != documents {
                seen[i] = documents;
                df[i] += 1;
            }
        }
    }
    if documents == 0 {
        return Err(Error::invalid("cannot compute token statistics on an empty corpus"));
    }
    Ok(TokenStats {
        documents,
        df,
        source,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Weighting {
    Uniform,
    Idf(StatsSource),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MaskMode {
    /// Mask tokens are averaged like any other token.
    Include,
    /// Only mask tokens are averaged.
    Only,
    /// Mask tokens are dropped.
    Exclude,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AggregationSpec {
    pub weighting: Weighting,
    pub remove_biases: bool,
    pub mask: MaskMode,
    pub layers: Vec<i32>,
}

impl AggregationSpec {
    pub fn mean(layers: Vec<i32>) -> Self {
        AggregationSpec {
            weighting: Weighting::Uniform,
            remove_biases: false,
            mask: MaskMode::Include,
            layers,
        }
    }

    /// Plain average of layers 1 and `last`.
    pub fn first_last(last: i32) -> Self {
        Self::mean(vec![1, last])
    }

    pub fn with_weighting(mut self, weighting: Weighting) -> Self {
        self.weighting = weighting;
        self
    }

    pub fn with_biases_removed(mut self) -> Self {
        self.remove_biases = true;
        self
    }

    pub fn with_mask(mut self, mask: MaskMode) -> Self {
        self.mask = mask;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::config("aggregation needs at least one layer"));
        }
        for (i, l) in self.layers.iter().enumerate() {
            if self.layers[..i].contains(l) {
                return Err(Error::config(format!("layer {l} listed twice")));
            }
        }
        Ok(())
    }

    pub fn stats_source(&self) -> Option<StatsSource> {
        match self.weighting {
            Weighting::Uniform => None,
            Weighting::Idf(s) => Some(s),
        }
    }

    /// The method name without its layer set.
    pub fn method_label(&self) -> String {
        let mut s = match self.weighting {
            Weighting::Uniform => String::from("avg"),
            Weighting::Idf(src) => format!("idf:{}", src.tag()),
        };
        if self.remove_biases {
            s.push_str("+biases");
        }
        match self.mask {
            MaskMode::Include => {}
            MaskMode::Only => s.push_str("+mask"),
            MaskMode::Exclude => s.push_str("+nomask"),
        }
        s
    }
}

/// `avg|idf:W|idf:T` followed by optional `+biases`, `+mask`, `+nomask`,
/// then `@` and a comma-separated layer list, e.g. `idf:W+biases@1,12`.
impl fmt::Display for AggregationSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let layers: Vec<String> = self.layers.iter().map(i32::to_string).collect();
        write!(f, "{}@{}", self.method_label(), layers.join(","))
    }
}

impl FromStr for AggregationSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (method, layers) = s
            .split_once('@')
            .ok_or_else(|| Error::config(format!("aggregation `{s}` lacks an @layer list")))?;
        let layers = parse_layers(layers)?;
        let mut parts = method.split('+');
        let weighting = match parts.next().unwrap_or_default() {
            "avg" | "mean" | "uniform" => Weighting::Uniform,
            w => match w.strip_prefix("idf:") {
                Some(src) => Weighting::Idf(src.parse()?),
                None => return Err(Error::config(format!("unknown weighting `{w}`"))),
            },
        };
        let mut spec = AggregationSpec::mean(layers).with_weighting(weighting);
        for modifier in parts {
            match modifier {
                "biases" => spec.remove_biases = true,
                "mask" if spec.mask == MaskMode::Include => spec.mask = MaskMode::Only,
                "nomask" if spec.mask == MaskMode::Include => spec.mask = MaskMode::Exclude,
                "mask" | "nomask" => {
                    return Err(Error::config(
                        "mask-only and exclude-mask are mutually exclusive",
                    ))
                }
                other => return Err(Error::config(format!("unknown modifier `{other}`"))),
            }
        }
        spec.validate()?;
        Ok(spec)
    }
}

pub fn parse_layers(s: &str) -> Result<Vec<i32>> {
    s.split(',')
        .map(|l| {
            l.trim()
                .parse::<i32>()
                .map_err(|_| Error::config(format!("bad layer index `{l}`")))
        })
        .collect()
}

/// Normalized token weights for one sentence.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenWeights {
    pub weights: Vec<f64>,
    /// Set when every token was filtered out (or all surviving idf values
    /// were zero) and uniform weights were used instead.
    pub fallback: bool,
}

fn uniform_over(mask: &[bool]) -> Vec<f64> {
    let n = mask.iter().filter(|&&m| m).count() as f64;
    mask.iter().map(|&m| if m { 1.0 / n } else { 0.0 }).collect()
}

pub fn token_weights(
    ids: &[u32],
    spec: &AggregationSpec,
    stats: Option<&TokenStats>,
    flags: &TokenClassFlags,
) -> Result<TokenWeights> {
    if ids.is_empty() {
        return Err(Error::invalid("sentence has no tokens"));
    }
    let keep: Vec<bool> = ids
        .iter()
        .map(|&id| {
            if flags.is_special(id) {
                return false;
            }
            let is_mask = flags.is_mask(id);
            match spec.mask {
                MaskMode::Only => is_mask,
                MaskMode::Exclude if is_mask => false,
                _ => !(spec.remove_biases && !is_mask && flags.is_bias(id)),
            }
        })
        .collect();

    if !keep.iter().any(|&k| k) {
        let content: Vec<bool> = ids.iter().map(|&id| !flags.is_special(id)).collect();
        let weights = if content.iter().any(|&c| c) {
            uniform_over(&content)
        } else {
            vec![1.0 / ids.len() as f64; ids.len()]
        };
        return Ok(TokenWeights {
            weights,
            fallback: true,
        });
    }

    let raw: Vec<f64> = match spec.weighting {
        Weighting::Uniform => keep.iter().map(|&k| if k { 1.0 } else { 0.0 }).collect(),
        Weighting::Idf(source) => {
            let stats = stats.ok_or_else(|| {
                Error::config(format!("idf weighting needs {} statistics", source.tag()))
            })?;
            ids.iter()
                .zip(&keep)
                .map(|(&id, &k)| if k { stats.idf(id) } else { 0.0 })
                .collect()
        }
    };
    let total: f64 = raw.iter().sum();
    if total <= 0.0 {
        return Ok(TokenWeights {
            weights: uniform_over(&keep),
            fallback: true,
        });
    }
    Ok(TokenWeights {
        weights: raw.into_iter().map(|w| w / total).collect(),
        fallback: false,
    })
}

/// Sentence vectors plus the number of sentences that fell back to
/// uniform weights.
#[derive(Debug, Clone)]
pub struct Aggregated {
    pub vectors: Array2<f64>,
    pub fallbacks: usize,
}

/// Weighted token sum per listed layer, then the mean over layers.
pub fn aggregate(
    tensor: &EmbeddingTensor,
    spec: &AggregationSpec,
    stats: Option<&TokenStats>,
    flags: &TokenClassFlags,
) -> Result<Aggregated> {
    spec.validate()?;
    let positions = spec
        .layers
        .iter()
        .map(|&l| tensor.layer_position(l))
        .collect::<Result<Vec<_>>>()?;
    if let (Weighting::Idf(src), None) = (spec.weighting, stats) {
        return Err(Error::config(format!(
            "idf weighting needs {} statistics",
            src.tag()
        )));
    }

    let dim = tensor.dim();
    let layer_count = positions.len() as f64;
    let rows: Vec<(Array1<f64>, bool)> = tensor
        .sentences()
        .par_iter()
        .map(|sentence| {
            let w = token_weights(&sentence.token_ids, spec, stats, flags)?;
            let mut out = Array1::<f64>::zeros(dim);
            for &pos in &positions {
                let matrix = &sentence.layers[pos];
                let mut layer_sum = Array1::<f64>::zeros(dim);
                for (row, &weight) in matrix.rows().into_iter().zip(&w.weights) {
                    if weight == 0.0 {
                        continue;
                    }
                    for (acc, &v) in layer_sum.iter_mut().zip(row) {
                        *acc += weight * f64::from(v);
                    }
                }
                out += &layer_sum;
            }
            out /= layer_count;
            Ok((out, w.fallback))
        })
        .collect::<Result<_>>()?;

    let mut vectors = Array2::zeros((rows.len(), dim));
    let mut fallbacks = 0;
    for (mut dst, (row, fallback)) in vectors.rows_mut().into_iter().zip(rows) {
        dst.assign(&row);
        fallbacks += usize::from(fallback);
    }
    Ok(Aggregated { vectors, fallbacks })
}
