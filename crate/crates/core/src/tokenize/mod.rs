//! Tokenization, token classes, prompt templates and the random-embedding model.

mod classes;
mod random;
mod template;
mod vocab;
mod wordpiece;

pub use classes::{
    classify_tokens, classify_with_stoplist, classify_without_frequency, load_stoplist,
    TokenClassFlags, DEFAULT_FREQUENT_K,
};
pub use random::{random_embed, random_vector, RANDOM_STD, STATIC_LAYER};
pub use template::{apply_template, TemplateSpec, TemplatedSequence, PAYLOAD_SLOT};
pub use vocab::{SpecialIds, Vocabulary, CONTINUATION_PREFIX, MASK_TOKEN};
pub use wordpiece::{basic_tokenize, encode, tokenize, MAX_WORD_CHARS};

/// Tokenizes every text; texts that produce no tokens get the unknown token
/// so downstream tensors keep one row per text.
pub fn tokenize_all(texts: &[String], vocab: &Vocabulary) -> Vec<Vec<u32>> {
    use rayon::prelude::*;
    texts
        .par_iter()
        .map(|t| {
            let ids = wordpiece::tokenize_unchecked(t, vocab);
            if ids.is_empty() {
                vec![vocab.special().unk]
            } else {
                ids
            }
        })
        .collect()
}
