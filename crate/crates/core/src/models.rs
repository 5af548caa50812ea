//! Static token tables: corpus-averaged contextual vectors, externally
//! trained word vectors, and the contextual/static mix.
//!
//! STT1 layout (little-endian):
//!
//! ```text
//! "STT1" | u32 d | u32 entry_count
//! per entry: u32 id | u64 count | f32 × d
//! ```

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::{Array2, ArrayView1};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::store::{DumpReader, EmbeddingTensor, SentenceEmbedding};
use crate::tokenize::{basic_tokenize, STATIC_LAYER};

pub const TABLE_MAGIC: &[u8; 4] = b"STT1";

/// Token id used for sentences whose tokens are all missing from a table.
pub const ABSENT_ID: u32 = u32::MAX;

const SHARD: usize = 256;

#[derive(Debug, Clone, PartialEq)]
pub struct StaticTable {
    dim: usize,
    ids: Vec<u32>,
    vectors: Array2<f32>,
    counts: Vec<u64>,
    index: HashMap<u32, usize>,
    /// Surface forms for word-level tables; `ids` are then word ranks.
    words: Option<Vec<String>>,
    word_index: HashMap<String, u32>,
    pub layer_tag: String,
    pub corpus_tag: String,
}

impl StaticTable {
    pub fn new(
        dim: usize,
        ids: Vec<u32>,
        vectors: Array2<f32>,
        counts: Vec<u64>,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("table dimension must be at least 1"));
        }
        if vectors.dim() != (ids.len(), dim) || counts.len() != ids.len() {
            return Err(Error::invalid(format!(
                "table shape mismatch: {} ids, {} counts, vectors {:?}, dim {dim}",
                ids.len(),
                counts.len(),
                vectors.dim()
            )));
        }
        if let Some(i) = counts.iter().position(|&c| c == 0) {
            return Err(Error::invalid(format!("entry {} has count 0", ids[i])));
        }
        if vectors.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("table contains non-finite values"));
        }
        let mut index = HashMap::with_capacity(ids.len());
        for (row, &id) in ids.iter().enumerate() {
            if index.insert(id, row).is_some() {
                return Err(Error::invalid(format!("token id {id} listed twice")));
            }
        }
        Ok(StaticTable {
            dim,
            ids,
            vectors,
            counts,
            index,
            words: None,
            word_index: HashMap::new(),
            layer_tag: String::new(),
            corpus_tag: String::new(),
        })
    }

    fn with_words(mut self, words: Vec<String>) -> Result<Self> {
        if words.len() != self.ids.len() {
            return Err(Error::invalid("word list length differs from entry count"));
        }
        self.word_index = words
            .iter()
            .zip(&self.ids)
            .map(|(w, &id)| (w.clone(), id))
            .collect();
        self.words = Some(words);
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[u32] {
        &self.ids
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn vectors(&self) -> &Array2<f32> {
        &self.vectors
    }

    pub fn is_word_level(&self) -> bool {
        self.words.is_some()
    }

    pub fn words(&self) -> Option<&[String]> {
        self.words.as_deref()
    }

    pub fn contains(&self, id: u32) -> bool {
        self.index.contains_key(&id)
    }

    pub fn vector(&self, id: u32) -> Option<ArrayView1<'_, f32>> {
        self.index.get(&id).map(|&row| self.vectors.row(row))
    }

    pub fn count(&self, id: u32) -> Option<u64> {
        self.index.get(&id).map(|&row| self.counts[row])
    }

    /// Word-level lookup ids for `text` (lowercased, whitespace and
    /// punctuation split). Unknown words are dropped.
    pub fn word_ids(&self, text: &str) -> Vec<u32> {
        basic_tokenize(text)
            .iter()
            .filter_map(|w| self.word_index.get(w).copied())
            .collect()
    }

    /// Count-weighted average of two tables over the union of their ids.
    pub fn merge(&self, other: &StaticTable) -> Result<StaticTable> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: other.dim,
            });
        }
        let mut builder = AvgBuilder::new(self.dim);
        for table in [self, other] {
            for (row, &id) in table.ids.iter().enumerate() {
                let c = table.counts[row];
                let entry = builder.entry(id);
                for (acc, &v) in entry.0.iter_mut().zip(table.vectors.row(row)) {
                    *acc += c as f64 * f64::from(v);
                }
                entry.1 += c;
            }
        }
        let mut t = builder.finish()?;
        t.layer_tag = self.layer_tag.clone();
        t.corpus_tag = self.corpus_tag.clone();
        Ok(t)
    }

    /// Drops the `m` highest-count entries (ties: lower id dropped first).
    pub fn filter_top_frequent(&self, m: usize) -> Result<StaticTable> {
        if m >= self.len() {
            return Err(Error::invalid(format!(
                "cannot drop {m} of {} entries",
                self.len()
            )));
        }
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.sort_by(|&a, &b| {
            self.counts[b]
                .cmp(&self.counts[a])
                .then(self.ids[a].cmp(&self.ids[b]))
        });
        let mut keep: Vec<usize> = order[m..].to_vec();
        keep.sort_unstable();
        let ids = keep.iter().map(|&r| self.ids[r]).collect();
        let counts = keep.iter().map(|&r| self.counts[r]).collect();
        let vectors = self.vectors.select(ndarray::Axis(0), &keep);
        let mut t = StaticTable::new(self.dim, ids, vectors, counts)?;
        if let Some(words) = &self.words {
            t = t.with_words(keep.iter().map(|&r| words[r].clone()).collect())?;
        }
        t.layer_tag = self.layer_tag.clone();
        t.corpus_tag = self.corpus_tag.clone();
        Ok(t)
    }
}

/// Running per-token sums for building averaged tables in shards.
#[derive(Debug, Clone)]
pub struct AvgBuilder {
    dim: usize,
    sums: BTreeMap<u32, (Vec<f64>, u64)>,
}

impl AvgBuilder {
    pub fn new(dim: usize) -> Self {
        AvgBuilder {
            dim,
            sums: BTreeMap::new(),
        }
    }

    fn entry(&mut self, id: u32) -> &mut (Vec<f64>, u64) {
        let dim = self.dim;
        self.sums.entry(id).or_insert_with(|| (vec![0.0; dim], 0))
    }

    /// Adds one occurrence of `id`, its vector being the mean of `rows`.
    pub fn add<'a>(&mut self, id: u32, rows: impl IntoIterator<Item = ArrayView1<'a, f32>>) {
        let mut n = 0usize;
        let mut acc = vec![0.0f64; self.dim];
        for row in rows {
            for (a, &v) in acc.iter_mut().zip(row) {
                *a += f64::from(v);
            }
            n += 1;
        }
        let entry = self.entry(id);
        for (s, a) in entry.0.iter_mut().zip(acc) {
            *s += a / n as f64;
        }
        entry.1 += 1;
    }

    pub fn absorb(&mut self, other: AvgBuilder) {
        for (id, (sum, count)) in other.sums {
            let entry = self.entry(id);
            for (s, v) in entry.0.iter_mut().zip(sum) {
                *s += v;
            }
            entry.1 += count;
        }
    }

    pub fn finish(self) -> Result<StaticTable> {
        if self.sums.is_empty() {
            return Err(Error::invalid("no token occurrences to average"));
        }
        let n = self.sums.len();
        let mut ids = Vec::with_capacity(n);
        let mut counts = Vec::with_capacity(n);
        let mut vectors = Array2::zeros((n, self.dim));
        for (mut row, (id, (sum, count))) in vectors.rows_mut().into_iter().zip(self.sums) {
            for (dst, s) in row.iter_mut().zip(sum) {
                *dst = (s / count as f64) as f32;
            }
            ids.push(id);
            counts.push(count);
        }
        StaticTable::new(self.dim, ids, vectors, counts)
    }
}

/// Averages every token's layer-set-mean vector over all its occurrences.
pub fn build_avg_table(dump: &EmbeddingTensor, layers: &[i32]) -> Result<StaticTable> {
    if dump.sentence_count() == 0 {
        return Err(Error::invalid("cannot build a table from an empty corpus"));
    }
    if layers.is_empty() {
        return Err(Error::config("layer set is empty"));
    }
    let positions = layers
        .iter()
        .map(|&l| dump.layer_position(l))
        .collect::<Result<Vec<_>>>()?;
    let dim = dump.dim();
    let builder = dump
        .sentences()
        .par_chunks(SHARD)
        .map(|shard| {
            let mut b = AvgBuilder::new(dim);
            for s in shard {
                for (t, &id) in s.token_ids.iter().enumerate() {
                    b.add(id, positions.iter().map(|&p| s.layers[p].row(t)));
                }
            }
            b
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold(AvgBuilder::new(dim), |mut acc, b| {
            acc.absorb(b);
            acc
        });
    let mut table = builder.finish()?;
    table.layer_tag = layers
        .iter()
        .map(i32::to_string)
        .collect::<Vec<_>>()
        .join(",");
    Ok(table)
}

/// One table per layer, for combining contextual and static vectors layer
/// by layer.
pub fn build_layered_avg(dump: &EmbeddingTensor, layers: &[i32]) -> Result<Vec<(i32, StaticTable)>> {
    layers
        .iter()
        .map(|&l| Ok((l, build_avg_table(dump, &[l])?)))
        .collect()
}

/// Streaming table builder for corpus dumps too large to hold in memory.
/// Each group of layers yields one table averaging over that group; shards
/// match the in-memory builder, so results agree bit for bit.
pub fn build_avg_tables_from<R: Read>(
    reader: DumpReader<R>,
    groups: &[Vec<i32>],
) -> Result<Vec<StaticTable>> {
    if groups.is_empty() || groups.iter().any(Vec::is_empty) {
        return Err(Error::config("layer set is empty"));
    }
    let mut wanted: Vec<i32> = groups.iter().flatten().copied().collect();
    wanted.sort_unstable();
    wanted.dedup();
    let reader = reader.keep_layers(&wanted)?;
    let dim = reader.dim();
    let kept = reader.layers();
    let positions: Vec<Vec<usize>> = groups
        .iter()
        .map(|g| {
            g.iter()
                .map(|l| kept.iter().position(|k| k == l).expect("kept layer"))
                .collect()
        })
        .collect();
    let mut builders: Vec<AvgBuilder> = groups.iter().map(|_| AvgBuilder::new(dim)).collect();
    let mut batch = Vec::with_capacity(SHARD);
    let mut reader = reader.peekable();
    while reader.peek().is_some() {
        batch.clear();
        for s in reader.by_ref().take(SHARD) {
            batch.push(s?);
        }
        let shard: Vec<AvgBuilder> = positions
            .par_iter()
            .map(|group| {
                let mut b = AvgBuilder::new(dim);
                for s in &batch {
                    for (t, &id) in s.token_ids.iter().enumerate() {
                        b.add(id, group.iter().map(|&p| s.layers[p].row(t)));
                    }
                }
                b
            })
            .collect();
        for (acc, b) in builders.iter_mut().zip(shard) {
            acc.absorb(b);
        }
    }
    groups
        .iter()
        .zip(builders)
        .map(|(g, b)| {
            let mut t = b.finish()?;
            t.layer_tag = g.iter().map(i32::to_string).collect::<Vec<_>>().join(",");
            Ok(t)
        })
        .collect()
}

/// A table-backed tensor plus the sentences that had no in-table token.
#[derive(Debug, Clone)]
pub struct TableEmbedding {
    pub tensor: EmbeddingTensor,
    pub empty_sentences: Vec<usize>,
}

/// Looks every token up in the table, dropping tokens the table lacks.
/// The result is a single-layer tensor stored under the static layer index.
pub fn embed_with_table(
    texts: &[String],
    token_ids: &[Vec<u32>],
    table: &StaticTable,
) -> Result<TableEmbedding> {
    embed_layers(texts, token_ids, &[(STATIC_LAYER, table)])
}

/// Multi-layer variant of [`embed_with_table`]: one table per output layer.
/// Token membership is decided by the first table.
pub fn embed_layers(
    texts: &[String],
    token_ids: &[Vec<u32>],
    tables: &[(i32, &StaticTable)],
) -> Result<TableEmbedding> {
    let (_, first) = tables
        .first()
        .ok_or_else(|| Error::invalid("at least one table is required"))?;
    if first.is_empty() {
        return Err(Error::invalid("table is empty"));
    }
    if texts.len() != token_ids.len() {
        return Err(Error::invalid(format!(
            "{} texts but {} token sequences",
            texts.len(),
            token_ids.len()
        )));
    }
    let dim = first.dim();
    if let Some((l, t)) = tables.iter().find(|(_, t)| t.dim() != dim) {
        return Err(Error::invalid(format!(
            "table for layer {l} has dim {}, expected {dim}",
            t.dim()
        )));
    }
    let built: Vec<(SentenceEmbedding, bool)> = texts
        .par_iter()
        .zip(token_ids)
        .map(|(text, ids)| {
            let kept: Vec<u32> = ids.iter().copied().filter(|&id| first.contains(id)).collect();
            if kept.is_empty() {
                let ids = if ids.is_empty() { vec![ABSENT_ID] } else { ids.clone() };
                let layers = tables.iter().map(|_| Array2::zeros((ids.len(), dim))).collect();
                return Ok((
                    SentenceEmbedding {
                        text: text.clone(),
                        token_ids: ids,
                        layers,
                    },
                    true,
                ));
            }
            let layers = tables
                .iter()
                .map(|(layer, table)| {
                    let mut m = Array2::zeros((kept.len(), dim));
                    for (mut row, &id) in m.rows_mut().into_iter().zip(&kept) {
                        let v = table.vector(id).ok_or_else(|| {
                            Error::invalid(format!("token {id} missing from layer {layer} table"))
                        })?;
                        row.assign(&v);
                    }
                    Ok(m)
                })
                .collect::<Result<Vec<_>>>()?;
            Ok((
                SentenceEmbedding {
                    text: text.clone(),
                    token_ids: kept,
                    layers,
                },
                false,
            ))
        })
        .collect::<Result<_>>()?;

    let mut empty_sentences = Vec::new();
    let mut sentences = Vec::with_capacity(built.len());
    for (i, (s, empty)) in built.into_iter().enumerate() {
        if empty {
            empty_sentences.push(i);
        }
        sentences.push(s);
    }
    if !empty_sentences.is_empty() {
        log::warn!(
            "{} sentences have no in-table tokens and get zero vectors",
            empty_sentences.len()
        );
    }
    let layers = tables.iter().map(|(l, _)| *l).collect();
    Ok(TableEmbedding {
        tensor: EmbeddingTensor::new(dim, layers, sentences)?,
        empty_sentences,
    })
}

/// Word-level counterpart of [`embed_with_table`] for tables loaded from
/// word vector files.
pub fn embed_words(texts: &[String], table: &StaticTable) -> Result<TableEmbedding> {
    if !table.is_word_level() {
        return Err(Error::invalid("table has no word list"));
    }
    let ids: Vec<Vec<u32>> = texts.par_iter().map(|t| table.word_ids(t)).collect();
    embed_with_table(texts, &ids, table)
}

/// `a·(1−w) + b·w`, elementwise. The endpoints return the respective input
/// unchanged, so signed zeros survive.
pub fn combine(a: &Array2<f64>, b: &Array2<f64>, w: f64) -> Result<Array2<f64>> {
    if a.dim() != b.dim() {
        return Err(Error::invalid(format!(
            "cannot combine shapes {:?} and {:?}",
            a.dim(),
            b.dim()
        )));
    }
    if !w.is_finite() {
        return Err(Error::invalid(format!("combine weight {w} is not finite")));
    }
    if w == 0.0 {
        return Ok(a.clone());
    }
    if w == 1.0 {
        return Ok(b.clone());
    }
    let mut out = a * (1.0 - w);
    out.zip_mut_with(b, |o, &bv| *o += bv * w);
    Ok(out)
}

pub fn write_table<W: Write>(table: &StaticTable, sink: W) -> Result<()> {
    let mut w = BufWriter::new(sink);
    let io = |source| Error::Io { offset: 0, source };
    w.write_all(TABLE_MAGIC).map_err(io)?;
    w.write_all(&(table.dim as u32).to_le_bytes()).map_err(io)?;
    w.write_all(&(table.len() as u32).to_le_bytes()).map_err(io)?;
    for (row, &id) in table.ids.iter().enumerate() {
        w.write_all(&id.to_le_bytes()).map_err(io)?;
        w.write_all(&table.counts[row].to_le_bytes()).map_err(io)?;
        for v in table.vectors.row(row) {
            w.write_all(&v.to_le_bytes()).map_err(io)?;
        }
    }
    w.flush().map_err(io)
}

pub fn read_table<R: Read>(source: R) -> Result<StaticTable> {
    let mut r = BufReader::new(source);
    let mut take = |n: usize, record: usize, field: &'static str| -> Result<Vec<u8>> {
        let mut b = vec![0u8; n];
        r.read_exact(&mut b)
            .map_err(|_| Error::Truncated { record, field })?;
        Ok(b)
    };
    let magic = take(4, 0, "magic")?;
    if magic != TABLE_MAGIC {
        return Err(Error::Format {
            field: "magic",
            reason: format!("expected STT1, found {:?}", String::from_utf8_lossy(&magic)),
        });
    }
    let u32_at = |b: &[u8]| u32::from_le_bytes(b.try_into().expect("4 bytes"));
    let dim = u32_at(&take(4, 0, "dim")?) as usize;
    let n = u32_at(&take(4, 0, "entry_count")?) as usize;
    let mut ids = Vec::with_capacity(n);
    let mut counts = Vec::with_capacity(n);
    let mut vectors = Array2::zeros((n, dim));
    for e in 0..n {
        ids.push(u32_at(&take(4, e, "id")?));
        counts.push(u64::from_le_bytes(
            take(8, e, "count")?.try_into().expect("8 bytes"),
        ));
        let raw = take(4 * dim, e, "vector")?;
        for (dst, c) in vectors.row_mut(e).iter_mut().zip(raw.chunks_exact(4)) {
            *dst = f32::from_le_bytes(c.try_into().expect("4 bytes"));
        }
    }
    StaticTable::new(dim, ids, vectors, counts)
}

pub fn save_table(table: &StaticTable, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    write_table(table, File::create(path).map_err(|e| Error::file(path, e))?)
}

pub fn load_table(path: impl AsRef<Path>) -> Result<StaticTable> {
    let path = path.as_ref();
    read_table(File::open(path).map_err(|e| Error::file(path, e))?)
}

/// Parses word2vec text vectors. Entry ids are line ranks and counts are
/// synthesized as `entry_count − rank`, so file order is frequency order.
pub fn read_word2vec<R: Read>(source: R) -> Result<StaticTable> {
    let reader = BufReader::new(source);
    let mut lines = reader.lines();
    let parse_err = |line: usize, reason: String| Error::Parse { line, reason };
    let header = lines
        .next()
        .ok_or_else(|| parse_err(1, "missing header".into()))?
        .map_err(|e| parse_err(1, e.to_string()))?;
    let mut head = header.split_whitespace();
    let mut field = |name: &str| -> Result<usize> {
        head.next()
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| parse_err(1, format!("header needs `count dim`, bad {name}")))
    };
    let (n, dim) = (field("count")?, field("dim")?);
    if dim == 0 {
        return Err(parse_err(1, "dimension must be at least 1".into()));
    }
    let mut words = Vec::with_capacity(n);
    let mut vectors = Array2::zeros((n, dim));
    for (i, line) in lines.enumerate() {
        let lineno = i + 2;
        let line = line.map_err(|e| parse_err(lineno, e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let row = words.len();
        if row >= n {
            return Err(parse_err(lineno, format!("more than {n} entries")));
        }
        let mut parts = line.split_whitespace();
        let word = parts.next().expect("non-empty line").to_string();
        let values: Vec<f32> = parts
            .map(|v| {
                v.parse::<f32>()
                    .map_err(|e| parse_err(lineno, format!("bad value `{v}`: {e}")))
            })
            .collect::<Result<_>>()?;
        if values.len() != dim {
            return Err(parse_err(
                lineno,
                format!("expected {dim} values, found {}", values.len()),
            ));
        }
        vectors
            .row_mut(row)
            .assign(&ArrayView1::from(values.as_slice()));
        words.push(word);
    }
    if words.len() != n {
        return Err(parse_err(
            words.len() + 2,
            format!("header announces {n} entries, found {}", words.len()),
        ));
    }
    let ids = (0..n as u32).collect();
    let counts = (0..n as u64).map(|r| n as u64 - r).collect();
    StaticTable::new(dim, ids, vectors, counts)?.with_words(words)
}

pub fn load_word2vec(path: impl AsRef<Path>) -> Result<StaticTable> {
    let path = path.as_ref();
    read_word2vec(File::open(path).map_err(|e| Error::file(path, e))?)
}

/// Writes a word-level table as word2vec text, in id order.
pub fn write_word2vec<W: Write>(table: &StaticTable, sink: W) -> Result<()> {
    let words = table
        .words()
        .ok_or_else(|| Error::invalid("table has no word list"))?;
    let mut w = BufWriter::new(sink);
    let io = |source| Error::Io { offset: 0, source };
    writeln!(w, "{} {}", table.len(), table.dim()).map_err(io)?;
    for (row, word) in words.iter().enumerate() {
        write!(w, "{word}").map_err(io)?;
        for v in table.vectors.row(row) {
            write!(w, " {v}").map_err(io)?;
        }
        writeln!(w).map_err(io)?;
    }
    w.flush().map_err(io)
}
