//! Layered token embeddings and the canonical dataset readers.
//!
//! An [`EmbeddingTensor`] holds, for every sentence, its raw text, its
//! vocabulary ids and one `token_count × dim` matrix per stored layer.
//! Layer `-1` is the static token-embedding table, layer `0` the input
//! embeddings and `1..=L` the transformer block outputs.

mod dump;
mod tsv;

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};

pub use dump::{
    load_dump, open_dump, read_dump, save_dump, write_dump, DumpReader, DUMP_MAGIC, DUMP_VERSION,
};
pub use tsv::{
    parse_labeled_tsv, parse_pair_tsv, read_labeled_tsv, read_pair_tsv, LabeledTextSet,
    ScoredPair, SentencePairSet, Split,
};

/// One sentence of an [`EmbeddingTensor`].
#[derive(Debug, Clone, PartialEq)]
pub struct SentenceEmbedding {
    pub text: String,
    pub token_ids: Vec<u32>,
    /// One matrix per layer, in the tensor's layer order.
    pub layers: Vec<Array2<f32>>,
}

impl SentenceEmbedding {
    pub fn token_count(&self) -> usize {
        self.token_ids.len()
    }
}

/// Per-sentence, per-layer token vectors. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTensor {
    dim: usize,
    layers: Vec<i32>,
    sentences: Vec<SentenceEmbedding>,
}

impl EmbeddingTensor {
    pub fn new(dim: usize, layers: Vec<i32>, sentences: Vec<SentenceEmbedding>) -> Result<Self> {
        let tensor = EmbeddingTensor {
            dim,
            layers,
            sentences,
        };
        tensor.validate()?;
        Ok(tensor)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::InvalidTensor("dim must be at least 1".into()));
        }
        if self.layers.is_empty() {
            return Err(Error::InvalidTensor("at least one layer is required".into()));
        }
        for (i, &layer) in self.layers.iter().enumerate() {
            if layer < -1 {
                return Err(Error::InvalidTensor(format!(
                    "layer index {layer} is below -1"
                )));
            }
            if self.layers[..i].contains(&layer) {
                return Err(Error::InvalidTensor(format!(
                    "layer index {layer} listed twice"
                )));
            }
        }
        for (s, sentence) in self.sentences.iter().enumerate() {
            let n = sentence.token_count();
            if n == 0 {
                return Err(Error::InvalidTensor(format!("sentence {s} has no tokens")));
            }
            if sentence.layers.len() != self.layers.len() {
                return Err(Error::InvalidTensor(format!(
                    "sentence {s} has {} layer matrices, expected {}",
                    sentence.layers.len(),
                    self.layers.len()
                )));
            }
            for (matrix, layer) in sentence.layers.iter().zip(&self.layers) {
                if matrix.dim() != (n, self.dim) {
                    return Err(Error::InvalidTensor(format!(
                        "sentence {s} layer {layer} has shape {:?}, expected ({n}, {})",
                        matrix.dim(),
                        self.dim
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn layers(&self) -> &[i32] {
        &self.layers
    }

    pub fn sentence_count(&self) -> usize {
        self.sentences.len()
    }

    pub fn sentences(&self) -> &[SentenceEmbedding] {
        &self.sentences
    }

    pub fn sentence(&self, index: usize) -> &SentenceEmbedding {
        &self.sentences[index]
    }

    pub fn token_ids(&self) -> impl Iterator<Item = &[u32]> {
        self.sentences.iter().map(|s| s.token_ids.as_slice())
    }

    /// Position of `layer` in the stored layer list.
    pub fn layer_position(&self, layer: i32) -> Result<usize> {
        self.layers
            .iter()
            .position(|&l| l == layer)
            .ok_or(Error::MissingLayer(layer))
    }

    pub fn layer_matrix(&self, sentence: usize, layer: i32) -> Result<ArrayView2<'_, f32>> {
        let pos = self.layer_position(layer)?;
        Ok(self.sentences[sentence].layers[pos].view())
    }

    /// Highest stored layer index.
    pub fn last_layer(&self) -> i32 {
        self.layers.iter().copied().max().unwrap_or(-1)
    }

    /// Keeps only the sentences at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        let sentences = indices
            .iter()
            .map(|&i| {
                self.sentences.get(i).cloned().ok_or_else(|| {
                    Error::invalid(format!(
                        "sentence index {i} out of range for {} sentences",
                        self.sentences.len()
                    ))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        EmbeddingTensor::new(self.dim, self.layers.clone(), sentences)
    }
}
