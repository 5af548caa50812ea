use std::str::FromStr;

use super::vocab::{Vocabulary, MASK_TOKEN};
use super::wordpiece::tokenize_unchecked;
use crate::error::{Error, Result};

pub const PAYLOAD_SLOT: &str = "[X]";

/// A prompt with one payload slot and at least one mask slot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemplateSpec {
    pub id: String,
    pub text: String,
}

const BUILTIN: [(&str, &str); 5] = [
    ("T0", "This sentence: \"[X]\" means [MASK]."),
    ("T1", "This sentence: \"[X]\" means [MASK][MASK]."),
    (
        "T2",
        "This sentence: \"[X]\" means \"[MASK][MASK]\" and is about [MASK].",
    ),
    (
        "T3",
        "This sentence from the paraphrase dictionary: \"[X]\" means \"[MASK]\", which is about [MASK].",
    ),
    (
        "T4",
        "This sentence from the dictionary: \"[X]\" means \"[MASK]\" and is about [MASK], which is a synonym for [MASK].",
    ),
];

impl TemplateSpec {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Result<Self> {
        let spec = TemplateSpec {
            id: id.into(),
            text: text.into(),
        };
        let slots = spec.text.matches(PAYLOAD_SLOT).count();
        if slots != 1 {
            return Err(Error::invalid(format!(
                "template {} must contain exactly one {PAYLOAD_SLOT}, found {slots}",
                spec.id
            )));
        }
        if spec.mask_count() == 0 {
            return Err(Error::invalid(format!(
                "template {} has no {MASK_TOKEN} slot",
                spec.id
            )));
        }
        Ok(spec)
    }

    pub fn builtin(id: &str) -> Result<Self> {
        BUILTIN
            .iter()
            .find(|(name, _)| *name == id)
            .map(|(name, text)| TemplateSpec::new(*name, *text))
            .unwrap_or_else(|| Err(Error::invalid(format!("unknown template `{id}`"))))
    }

    pub fn mask_count(&self) -> usize {
        self.text.matches(MASK_TOKEN).count()
    }
}

impl FromStr for TemplateSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TemplateSpec::builtin(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemplatedSequence {
    /// Full model input, `[CLS] … [SEP]` included.
    pub ids: Vec<u32>,
    pub mask_positions: Vec<usize>,
    /// Half-open range of the payload tokens within `ids`.
    pub payload: std::ops::Range<usize>,
}

fn push_literal(text: &str, vocab: &Vocabulary, ids: &mut Vec<u32>) {
    let mask = vocab.special().mask;
    for (i, part) in text.split(MASK_TOKEN).enumerate() {
        if i > 0 {
            ids.push(mask);
        }
        if !part.trim().is_empty() {
            ids.extend(tokenize_unchecked(part, vocab));
        }
    }
}

/// Places `payload` into the template's `[X]` slot and tokenizes the result.
pub fn apply_template(
    spec: &TemplateSpec,
    payload: &str,
    vocab: &Vocabulary,
) -> Result<TemplatedSequence> {
    if payload.is_empty() {
        return Err(Error::invalid("template payload is empty"));
    }
    let payload_ids = tokenize_unchecked(payload, vocab);
    if payload_ids.is_empty() {
        return Err(Error::invalid(format!(
            "payload {payload:?} produced no tokens"
        )));
    }
    let (prefix, suffix) = spec
        .text
        .split_once(PAYLOAD_SLOT)
        .expect("validated template has a payload slot");

    let s = vocab.special();
    let mut ids = vec![s.cls];
    push_literal(prefix, vocab, &mut ids);
    let start = ids.len();
    ids.extend(payload_ids);
    let payload_range = start..ids.len();
    push_literal(suffix, vocab, &mut ids);
    ids.push(s.sep);

    let mask_positions = ids
        .iter()
        .enumerate()
        .filter(|&(_, &id)| id == s.mask)
        .map(|(i, _)| i)
        .collect();
    Ok(TemplatedSequence {
        ids,
        mask_positions,
        payload: payload_range,
    })
}
