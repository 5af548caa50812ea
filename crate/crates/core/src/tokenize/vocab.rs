use std::collections::HashMap;
use std::fs;
use std::path::Path;
use std::sync::OnceLock;

use crate::error::{Error, Result};

pub const CLS_TOKEN: &str = "[CLS]";
pub const SEP_TOKEN: &str = "[SEP]";
pub const MASK_TOKEN: &str = "[MASK]";
pub const UNK_TOKEN: &str = "[UNK]";
pub const PAD_TOKEN: &str = "[PAD]";
pub const CONTINUATION_PREFIX: &str = "##";

const BUNDLED_VOCAB: &str = include_str!("../../../../data/vocab-uncased.txt");

/// Ids of the special tokens, resolved by string lookup.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SpecialIds {
    pub cls: u32,
    pub sep: u32,
    pub mask: u32,
    pub unk: u32,
    pub pad: u32,
}

/// WordPiece vocabulary: line number in `vocab.txt` is the token id.
#[derive(Debug, Clone)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, u32>,
    special: SpecialIds,
}

impl Vocabulary {
    pub fn from_tokens(tokens: Vec<String>) -> Result<Self> {
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, tok) in tokens.iter().enumerate() {
            // first occurrence wins, like the reference loader
            index.entry(tok.clone()).or_insert(i as u32);
        }
        let find = |name: &str| {
            index
                .get(name)
                .copied()
                .ok_or_else(|| Error::invalid(format!("vocabulary lacks special token {name}")))
        };
        let special = SpecialIds {
            cls: find(CLS_TOKEN)?,
            sep: find(SEP_TOKEN)?,
            mask: find(MASK_TOKEN)?,
            unk: find(UNK_TOKEN)?,
            pad: find(PAD_TOKEN)?,
        };
        Ok(Vocabulary {
            tokens,
            index,
            special,
        })
    }

    pub fn parse(text: &str) -> Result<Self> {
        Self::from_tokens(
            text.lines()
                .map(|l| l.strip_suffix('\r').unwrap_or(l).to_string())
                .collect(),
        )
    }

    /// The bundled uncased base-model vocabulary (30,522 entries).
    pub fn bert_base_uncased() -> Self {
        static BUNDLED: OnceLock<Vocabulary> = OnceLock::new();
        BUNDLED
            .get_or_init(|| Self::parse(BUNDLED_VOCAB).expect("bundled vocabulary is valid"))
            .clone()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
        Self::parse(&text)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn special(&self) -> SpecialIds {
        self.special
    }

    pub fn is_special(&self, id: u32) -> bool {
        let s = self.special;
        id == s.cls || id == s.sep || id == s.mask || id == s.unk || id == s.pad
    }
}

#[cfg(test)]
pub(crate) fn test_vocab(extra: &[&str]) -> Vocabulary {
    let mut tokens: Vec<String> = [PAD_TOKEN, UNK_TOKEN, CLS_TOKEN, SEP_TOKEN, MASK_TOKEN]
        .iter()
        .map(|s| s.to_string())
        .collect();
    tokens.extend(extra.iter().map(|s| s.to_string()));
    Vocabulary::from_tokens(tokens).unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn specials_resolved_by_lookup() {
        let v = test_vocab(&["play", "##ing"]);
        assert_eq!(v.special().mask, 4);
        assert_eq!(v.id("##ing"), Some(6));
        assert!(v.is_special(2));
        assert!(!v.is_special(5));
    }

    #[test]
    fn missing_special_is_rejected() {
        let err = Vocabulary::parse("[PAD]\n[UNK]\nhello\n").unwrap_err();
        assert!(err.to_string().contains("[CLS]"));
    }
}
