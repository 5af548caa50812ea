use std::collections::HashSet;

use super::vocab::{Vocabulary, CONTINUATION_PREFIX};
use crate::aggregate::TokenStats;
use crate::error::{Error, Result};

/// Default number of most-frequent tokens dropped by bias removal.
pub const DEFAULT_FREQUENT_K: usize = 33;

/// Per-token class flags used by bias removal and special-token exclusion.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenClassFlags {
    pub punctuation: Vec<bool>,
    pub subword: Vec<bool>,
    pub frequent: Vec<bool>,
    /// Sequence markers and padding (`[CLS]`, `[SEP]`, `[PAD]`); never averaged.
    pub special: Vec<bool>,
    pub mask_id: Option<u32>,
}

fn is_punctuation_token(token: &str) -> bool {
    !token.chars().any(char::is_alphanumeric)
}

impl TokenClassFlags {
    fn base(tokens: &[String], is_special: impl Fn(u32) -> bool) -> Self {
        let n = tokens.len();
        let mut flags = TokenClassFlags {
            punctuation: Vec::with_capacity(n),
            subword: Vec::with_capacity(n),
            frequent: vec![false; n],
            special: Vec::with_capacity(n),
            mask_id: None,
        };
        for (id, tok) in tokens.iter().enumerate() {
            let special = is_special(id as u32);
            flags.special.push(special);
            flags.punctuation.push(!special && is_punctuation_token(tok));
            flags.subword.push(!special && tok.starts_with(CONTINUATION_PREFIX));
        }
        flags
    }

    /// Flags for a plain word list (static word-level tables): no specials,
    /// no subwords, frequent words by the given stats.
    pub fn for_words(words: &[String], stats: &TokenStats, k: usize) -> Result<Self> {
        let mut flags = Self::base(words, |_| false);
        flags.subword.iter_mut().for_each(|s| *s = false);
        flags.mark_top_k(stats, k)?;
        Ok(flags)
    }

    fn mark_top_k(&mut self, stats: &TokenStats, k: usize) -> Result<()> {
        let n = self.special.len();
        if k > n {
            return Err(Error::invalid(format!(
                "k = {k} exceeds vocabulary size {n}"
            )));
        }
        let mut ranked: Vec<u32> = (0..n as u32)
            .filter(|&id| !self.special[id as usize] && stats.df(id) > 0)
            .collect();
        ranked.sort_by(|&a, &b| stats.df(b).cmp(&stats.df(a)).then(a.cmp(&b)));
        for &id in ranked.iter().take(k) {
            self.frequent[id as usize] = true;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.special.len()
    }

    pub fn is_empty(&self) -> bool {
        self.special.is_empty()
    }

    fn get(v: &[bool], id: u32) -> bool {
        v.get(id as usize).copied().unwrap_or(false)
    }

    pub fn is_special(&self, id: u32) -> bool {
        Self::get(&self.special, id)
    }

    pub fn is_mask(&self, id: u32) -> bool {
        self.mask_id == Some(id)
    }

    /// Frequent, punctuation or subword: dropped by bias removal.
    pub fn is_bias(&self, id: u32) -> bool {
        Self::get(&self.frequent, id)
            || Self::get(&self.punctuation, id)
            || Self::get(&self.subword, id)
    }
}

/// Classifies every vocabulary entry; `frequent` marks the `k` tokens with
/// the highest document frequency (ties by ascending id).
pub fn classify_tokens(
    vocab: &Vocabulary,
    frequency_source: &TokenStats,
    k: usize,
) -> Result<TokenClassFlags> {
    let mut flags = vocab_base(vocab);
    flags.mark_top_k(frequency_source, k)?;
    Ok(flags)
}

/// Classifies tokens with an explicit frequent-token stoplist instead of a
/// df ranking. Stoplist entries missing from the vocabulary are ignored.
pub fn classify_with_stoplist(vocab: &Vocabulary, stoplist: &[String]) -> TokenClassFlags {
    let mut flags = vocab_base(vocab);
    let stop: HashSet<&str> = stoplist.iter().map(String::as_str).collect();
    for (id, tok) in vocab.tokens().iter().enumerate() {
        if stop.contains(tok.as_str()) && !flags.special[id] {
            flags.frequent[id] = true;
        }
    }
    flags
}

/// Flags with nothing marked frequent; enough for special-token exclusion.
pub fn classify_without_frequency(vocab: &Vocabulary) -> TokenClassFlags {
    vocab_base(vocab)
}

fn vocab_base(vocab: &Vocabulary) -> TokenClassFlags {
    let s = vocab.special();
    let mut flags =
        TokenClassFlags::base(vocab.tokens(), |id| id == s.cls || id == s.sep || id == s.pad);
    flags.mask_id = Some(s.mask);
    flags
}

pub fn load_stoplist(path: impl AsRef<std::path::Path>) -> Result<Vec<String>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(String::from)
        .collect())
}
