//! Uncased WordPiece tokenization.
//!
//! Basic tokenization cleans control characters, isolates CJK ideographs,
//! lowercases, strips accents (NFD then drop non-spacing marks) and splits
//! on whitespace and punctuation. Each resulting word is then split by
//! greedy longest-match against the vocabulary, continuation pieces carrying
//! the `##` prefix.

use unicode_general_category::get_general_category;
use unicode_normalization::UnicodeNormalization;

use super::vocab::{Vocabulary, CONTINUATION_PREFIX};
use crate::error::{Error, Result};

/// Words longer than this (in chars) become the unknown token.
pub const MAX_WORD_CHARS: usize = 100;

fn category(c: char) -> &'static str {
    get_general_category(c).abbreviation()
}

fn is_whitespace(c: char) -> bool {
    matches!(c, ' ' | '\t' | '\n' | '\r') || category(c) == "Zs"
}

fn is_control(c: char) -> bool {
    if matches!(c, '\t' | '\n' | '\r') {
        return false;
    }
    category(c).starts_with('C')
}

pub(crate) fn is_punctuation(c: char) -> bool {
    let cp = c as u32;
    if (33..=47).contains(&cp)
        || (58..=64).contains(&cp)
        || (91..=96).contains(&cp)
        || (123..=126).contains(&cp)
    {
        return true;
    }
    category(c).starts_with('P')
}

fn is_cjk(c: char) -> bool {
    matches!(c as u32,
        0x4E00..=0x9FFF
        | 0x3400..=0x4DBF
        | 0x20000..=0x2A6DF
        | 0x2A700..=0x2B73F
        | 0x2B740..=0x2B81F
        | 0x2B820..=0x2CEAF
        | 0xF900..=0xFAFF
        | 0x2F800..=0x2FA1F)
}

fn strip_accents(word: &str) -> String {
    word.nfd().filter(|&c| category(c) != "Mn").collect()
}

/// Whitespace- and punctuation-split, lowercased, accent-free words.
pub fn basic_tokenize(text: &str) -> Vec<String> {
    let mut cleaned = String::with_capacity(text.len());
    for c in text.chars() {
        if c == '\0' || c == '\u{FFFD}' || is_control(c) {
            continue;
        }
        if is_cjk(c) {
            cleaned.push(' ');
            cleaned.push(c);
            cleaned.push(' ');
        } else if is_whitespace(c) {
            cleaned.push(' ');
        } else {
            cleaned.push(c);
        }
    }

    let mut out = Vec::new();
    for word in cleaned.split_whitespace() {
        let word = strip_accents(&word.to_lowercase());
        let mut current = String::new();
        for c in word.chars() {
            if is_punctuation(c) {
                if !current.is_empty() {
                    out.push(std::mem::take(&mut current));
                }
                out.push(c.to_string());
            } else {
                current.push(c);
            }
        }
        if !current.is_empty() {
            out.push(current);
        }
    }
    out
}

fn wordpiece(word: &str, vocab: &Vocabulary, out: &mut Vec<u32>) {
    let unk = vocab.special().unk;
    let chars: Vec<(usize, char)> = word.char_indices().collect();
    if chars.len() > MAX_WORD_CHARS {
        out.push(unk);
        return;
    }
    let start_len = out.len();
    let mut start = 0;
    let mut piece = String::new();
    while start < chars.len() {
        let mut end = chars.len();
        let mut found = None;
        while start < end {
            let from = chars[start].0;
            let to = chars.get(end).map_or(word.len(), |c| c.0);
            piece.clear();
            if start > 0 {
                piece.push_str(CONTINUATION_PREFIX);
            }
            piece.push_str(&word[from..to]);
            if let Some(id) = vocab.id(&piece) {
                found = Some(id);
                break;
            }
            end -= 1;
        }
        match found {
            Some(id) => out.push(id),
            None => {
                out.truncate(start_len);
                out.push(unk);
                return;
            }
        }
        start = end;
    }
}

/// Token ids for `text`, without sequence-start/separator tokens.
pub fn tokenize(text: &str, vocab: &Vocabulary) -> Result<Vec<u32>> {
    if text.is_empty() {
        return Err(Error::invalid("cannot tokenize an empty string"));
    }
    Ok(tokenize_unchecked(text, vocab))
}

pub(crate) fn tokenize_unchecked(text: &str, vocab: &Vocabulary) -> Vec<u32> {
    let mut ids = Vec::new();
    for word in basic_tokenize(text) {
        wordpiece(&word, vocab, &mut ids);
    }
    ids
}

/// Like [`tokenize`], optionally wrapped in `[CLS] … [SEP]`.
pub fn encode(text: &str, vocab: &Vocabulary, wrap: bool) -> Result<Vec<u32>> {
    let ids = tokenize(text, vocab)?;
    if !wrap {
        return Ok(ids);
    }
    let s = vocab.special();
    let mut out = Vec::with_capacity(ids.len() + 2);
    out.push(s.cls);
    out.extend(ids);
    out.push(s.sep);
    Ok(out)
}
