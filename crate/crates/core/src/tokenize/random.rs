//! Random Embeddings baseline: every vocabulary id gets a fixed Gaussian vector.

use std::collections::{BTreeSet, HashMap};

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::store::{EmbeddingTensor, SentenceEmbedding};

pub const RANDOM_STD: f64 = 0.1;

/// Layer index under which static (context-free) vectors are stored.
pub const STATIC_LAYER: i32 = -1;

/// The vector of token `id`: `dim` draws from N(0, 0.1²) taken from the
/// ChaCha stream selected by `(seed, id)`, so it does not depend on which
/// other tokens were generated before it.
pub fn random_vector(seed: u64, id: u32, dim: usize) -> Vec<f32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(u64::from(id));
    let normal = Normal::new(0.0, RANDOM_STD).expect("valid std");
    (0..dim).map(|_| rng.sample::<f64, _>(normal) as f32).collect()
}

/// Builds a single-layer tensor of random token vectors.
pub fn random_embed(
    texts: &[String],
    token_ids: &[Vec<u32>],
    seed: u64,
    dim: usize,
) -> Result<EmbeddingTensor> {
    if dim == 0 {
        return Err(Error::invalid("dimension must be at least 1"));
    }
    if texts.len() != token_ids.len() {
        return Err(Error::invalid(format!(
            "{} texts but {} token sequences",
            texts.len(),
            token_ids.len()
        )));
    }
    let distinct: BTreeSet<u32> = token_ids.iter().flatten().copied().collect();
    let table: HashMap<u32, Vec<f32>> = distinct
        .into_par_iter()
        .map(|id| (id, random_vector(seed, id, dim)))
        .collect();

    let sentences = texts
        .iter()
        .zip(token_ids)
        .map(|(text, ids)| {
            let mut m = Array2::zeros((ids.len(), dim));
            for (mut row, id) in m.rows_mut().into_iter().zip(ids) {
                for (dst, &v) in row.iter_mut().zip(&table[id]) {
                    *dst = v;
                }
            }
            SentenceEmbedding {
                text: text.clone(),
                token_ids: ids.clone(),
                layers: vec![m],
            }
        })
        .collect();
    EmbeddingTensor::new(dim, vec![STATIC_LAYER], sentences)
}
