use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredPair {
    pub a: usize,
    pub b: usize,
    pub score: f64,
}

/// Scored sentence pairs. Sentences are stored interleaved: pair `i` refers
/// to sentences `2i` and `2i + 1`, which is also the order dumps of a pair
/// file are expected to follow.
#[derive(Debug, Clone, PartialEq)]
pub struct SentencePairSet {
    pub texts: Vec<String>,
    pub pairs: Vec<ScoredPair>,
    /// Optional subset label per pair (e.g. the source year of an STS split).
    pub tags: Vec<Option<String>>,
}

impl SentencePairSet {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn scores(&self) -> Vec<f64> {
        self.pairs.iter().map(|p| p.score).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Dev,
    Test,
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "dev" => Ok(Split::Dev),
            "test" => Ok(Split::Test),
            other => Err(Error::invalid(format!("unknown split `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledTextSet {
    pub texts: Vec<String>,
    pub labels: Vec<usize>,
    /// Per-row split; all `None` when the set ships without an official split.
    pub splits: Vec<Option<Split>>,
}

impl LabeledTextSet {
    pub fn len(&self) -> usize {
        self.texts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.texts.is_empty()
    }

    pub fn class_count(&self) -> usize {
        self.labels.iter().max().map_or(0, |m| m + 1)
    }

    pub fn has_official_split(&self) -> bool {
        self.splits.iter().any(|s| *s == Some(Split::Test))
    }
}

fn lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.strip_suffix('\r').unwrap_or(l)))
        .filter(|(_, l)| !l.is_empty())
}

/// Parses `score\tsentence1\tsentence2[\ttag]` lines.
pub fn parse_pair_tsv(text: &str) -> Result<SentencePairSet> {
    let mut set = SentencePairSet {
        texts: Vec::new(),
        pairs: Vec::new(),
        tags: Vec::new(),
    };
    for (line, row) in lines(text) {
        let cols: Vec<&str> = row.split('\t').collect();
        if cols.len() != 3 && cols.len() != 4 {
            return Err(Error::Parse {
                line,
                reason: format!("expected 3 columns, found {}", cols.len()),
            });
        }
        let score: f64 = cols[0].trim().parse().map_err(|_| Error::Parse {
            line,
            reason: format!("bad score `{}`", cols[0]),
        })?;
        if !(0.0..=5.0).contains(&score) {
            return Err(Error::Range {
                line,
                reason: format!("score {score} outside [0, 5]"),
            });
        }
        let a = set.texts.len();
        set.texts.push(cols[1].to_string());
        set.texts.push(cols[2].to_string());
        set.pairs.push(ScoredPair { a, b: a + 1, score });
        set.tags.push(cols.get(3).map(|t| t.to_string()));
    }
    Ok(set)
}

/// Parses `label\ttext[\tsplit]` lines. Labels must be dense in `[0, C)`.
pub fn parse_labeled_tsv(text: &str) -> Result<LabeledTextSet> {
    let mut set = LabeledTextSet {
        texts: Vec::new(),
        labels: Vec::new(),
        splits: Vec::new(),
    };
    for (line, row) in lines(text) {
        let cols: Vec<&str> = row.split('\t').collect();
        if cols.len() != 2 && cols.len() != 3 {
            return Err(Error::Parse {
                line,
                reason: format!("expected 2 columns, found {}", cols.len()),
            });
        }
        let label: usize = cols[0].trim().parse().map_err(|_| Error::Parse {
            line,
            reason: format!("bad label `{}`", cols[0]),
        })?;
        let split = match cols.get(2) {
            Some(s) => Some(s.parse().map_err(|e: Error| Error::Parse {
                line,
                reason: e.to_string(),
            })?),
            None => None,
        };
        set.labels.push(label);
        set.texts.push(cols[1].to_string());
        set.splits.push(split);
    }
    let classes = set.class_count();
    let mut seen = vec![false; classes];
    for &l in &set.labels {
        seen[l] = true;
    }
    if let Some(missing) = seen.iter().position(|s| !s) {
        return Err(Error::Range {
            line: 0,
            reason: format!("labels are not dense: class {missing} never occurs"),
        });
    }
    Ok(set)
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::file(path, e))
}

pub fn read_pair_tsv(path: impl AsRef<Path>) -> Result<SentencePairSet> {
    parse_pair_tsv(&read_text(path.as_ref())?)
}

pub fn read_labeled_tsv(path: impl AsRef<Path>) -> Result<LabeledTextSet> {
    parse_labeled_tsv(&read_text(path.as_ref())?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_pair() {
        let set = parse_pair_tsv("5.0\tA man is singing.\tA man sings.\n").unwrap();
        assert_eq!(set.pairs, vec![ScoredPair { a: 0, b: 1, score: 5.0 }]);
        assert_eq!(set.texts, vec!["A man is singing.", "A man sings."]);
    }

    #[test]
    fn two_columns_is_a_parse_error_at_that_line() {
        let err = parse_pair_tsv("1.0\ta\tb\n2.0\tonly one\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err:?}");
    }

    #[test]
    fn score_out_of_range() {
        let err = parse_pair_tsv("5.5\ta\tb\n").unwrap_err();
        assert!(matches!(err, Error::Range { line: 1, .. }));
    }

    #[test]
    fn labeled_line() {
        let set = parse_labeled_tsv("0\tx\n1\ty\n2\tz\n3\tsome text\n").unwrap();
        assert_eq!(set.labels[3], 3);
        assert_eq!(set.texts[3], "some text");
        assert!(!set.has_official_split());
    }

    #[test]
    fn labeled_with_splits_and_sparse_labels() {
        let set = parse_labeled_tsv("0\ta\ttrain\n1\tb\ttest\n").unwrap();
        assert_eq!(set.splits, vec![Some(Split::Train), Some(Split::Test)]);
        assert!(parse_labeled_tsv("0\ta\n2\tb\n").is_err());
        assert!(parse_labeled_tsv("0\ta\tvalid\n").is_err());
    }

    #[test]
    fn order_preserved() {
        let set = parse_labeled_tsv("1\tb\n0\ta\n1\tc\n").unwrap();
        assert_eq!(set.texts, vec!["b", "a", "c"]);
        assert_eq!(set.labels, vec![1, 0, 1]);
    }
}
