//! WordPiece output against id sequences produced by the reference uncased
//! tokenizer on a 10k-line corpus (see `python/make_tokenizer_golden.py`).

use std::path::PathBuf;

use embshape_core::tokenize::{tokenize, Vocabulary};

fn repo_root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

#[test]
fn matches_reference_tokenizer_on_golden_corpus() {
    let vocab = Vocabulary::load(repo_root().join("data/vocab-uncased.txt")).unwrap();
    assert_eq!(vocab.len(), 30522);
    let golden = std::fs::read_to_string(
        PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data/tokenizer_golden.tsv"),
    )
    .unwrap();

    let mut total = 0;
    let mut mismatches = Vec::new();
    for (line_no, line) in golden.lines().enumerate() {
        let (text, ids) = line.split_once('\t').unwrap();
        let expected: Vec<u32> = ids.split(' ').filter(|s| !s.is_empty()).map(|s| s.parse().unwrap()).collect();
        let got = tokenize(text, &vocab).unwrap();
        total += 1;
        if got != expected {
            mismatches.push((line_no + 1, text.to_string()));
        }
    }
    assert_eq!(total, 10_000);
    assert!(
        mismatches.is_empty(),
        "{} of {total} lines differ, first: {:?}",
        mismatches.len(),
        &mismatches[..mismatches.len().min(5)]
    );
}

#[test]
fn playing_splits_into_play_ing() {
    let vocab = Vocabulary::load(repo_root().join("data/vocab-uncased.txt")).unwrap();
    let ids = tokenize("playing transformers", &vocab).unwrap();
    let toks: Vec<_> = ids.iter().map(|&i| vocab.token(i).unwrap()).collect();
    assert_eq!(toks, vec!["playing", "transformers"]);
    let ids = tokenize("transformer", &vocab).unwrap();
    let toks: Vec<_> = ids.iter().map(|&i| vocab.token(i).unwrap()).collect();
    assert_eq!(toks, vec!["transform", "##er"]);
}
