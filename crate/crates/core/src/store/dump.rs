//! TED1 binary dump: little-endian header followed by one record per sentence.
//!
//! ```text
//! "TED1" | u32 version=1 | u32 d | u32 layer_count | i32 × layer_count | u32 S
//! per sentence:
//!   u32 text_len | text (UTF-8) | u32 token_count | u32 × token_count
//!   per layer (header order): f32 × token_count × d, row-major
//! ```

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::Array2;

use super::{EmbeddingTensor, SentenceEmbedding};
use crate::error::{Error, Result};

pub const DUMP_MAGIC: &[u8; 4] = b"TED1";
pub const DUMP_VERSION: u32 = 1;

struct CountingWriter<W> {
    inner: W,
    offset: u64,
}

impl<W: Write> CountingWriter<W> {
    fn put(&mut self, bytes: &[u8]) -> Result<()> {
        self.inner.write_all(bytes).map_err(|source| Error::Io {
            offset: self.offset,
            source,
        })?;
        self.offset += bytes.len() as u64;
        Ok(())
    }

    fn put_u32(&mut self, v: u32) -> Result<()> {
        self.put(&v.to_le_bytes())
    }
}

fn to_u32(value: usize, field: &'static str) -> Result<u32> {
    u32::try_from(value).map_err(|_| Error::Format {
        field,
        reason: format!("{value} does not fit in u32"),
    })
}

pub fn write_dump<W: Write>(tensor: &EmbeddingTensor, sink: W) -> Result<()> {
    tensor.validate()?;
    if tensor.sentence_count() == 0 {
        return Err(Error::Format {
            field: "sentence_count",
            reason: "at least one sentence is required".into(),
        });
    }
    let mut w = CountingWriter {
        inner: sink,
        offset: 0,
    };
    w.put(DUMP_MAGIC)?;
    w.put_u32(DUMP_VERSION)?;
    w.put_u32(to_u32(tensor.dim(), "dim")?)?;
    w.put_u32(to_u32(tensor.layers().len(), "layer_count")?)?;
    for &layer in tensor.layers() {
        w.put(&layer.to_le_bytes())?;
    }
    w.put_u32(to_u32(tensor.sentence_count(), "sentence_count")?)?;

    let mut buf = Vec::new();
    for sentence in tensor.sentences() {
        buf.clear();
        buf.extend_from_slice(&to_u32(sentence.text.len(), "text_len")?.to_le_bytes());
        buf.extend_from_slice(sentence.text.as_bytes());
        buf.extend_from_slice(&to_u32(sentence.token_count(), "token_count")?.to_le_bytes());
        for id in &sentence.token_ids {
            buf.extend_from_slice(&id.to_le_bytes());
        }
        for matrix in &sentence.layers {
            for v in matrix.iter() {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
        w.put(&buf)?;
    }
    w.inner.flush().map_err(|source| Error::Io {
        offset: w.offset,
        source,
    })
}

struct FieldReader<R> {
    inner: R,
    record: usize,
}

impl<R: Read> FieldReader<R> {
    fn fill(&mut self, buf: &mut [u8], field: &'static str) -> Result<()> {
        self.inner.read_exact(buf).map_err(|e| {
            if e.kind() == io::ErrorKind::UnexpectedEof {
                Error::Truncated {
                    record: self.record,
                    field,
                }
            } else {
                Error::Io {
                    offset: 0,
                    source: e,
                }
            }
        })
    }

    fn u32(&mut self, field: &'static str) -> Result<u32> {
        let mut b = [0u8; 4];
        self.fill(&mut b, field)?;
        Ok(u32::from_le_bytes(b))
    }

    fn i32(&mut self, field: &'static str) -> Result<i32> {
        let mut b = [0u8; 4];
        self.fill(&mut b, field)?;
        Ok(i32::from_le_bytes(b))
    }
}

/// Streaming TED1 reader: parses the header up front and yields one
/// sentence per iteration, optionally keeping only some layers.
pub struct DumpReader<R> {
    r: FieldReader<R>,
    dim: usize,
    layers: Vec<i32>,
    keep: Vec<bool>,
    count: usize,
    next: usize,
    failed: bool,
}

impl<R: Read> DumpReader<R> {
    pub fn new(source: R) -> Result<Self> {
        let mut r = FieldReader {
            inner: source,
            record: 0,
        };
        let mut magic = [0u8; 4];
        r.fill(&mut magic, "magic")?;
        if &magic != DUMP_MAGIC {
            if magic.starts_with(b"TED") {
                return Err(Error::UnsupportedVersion(
                    String::from_utf8_lossy(&magic).into_owned(),
                ));
            }
            return Err(Error::Format {
                field: "magic",
                reason: format!("expected \"TED1\", found {magic:?}"),
            });
        }
        let version = r.u32("version")?;
        if version != DUMP_VERSION {
            return Err(Error::UnsupportedVersion(format!("TED1 version {version}")));
        }
        let dim = r.u32("dim")? as usize;
        if dim == 0 {
            return Err(Error::Format {
                field: "dim",
                reason: "must be at least 1".into(),
            });
        }
        let layer_count = r.u32("layer_count")? as usize;
        if layer_count == 0 {
            return Err(Error::Format {
                field: "layer_count",
                reason: "must be at least 1".into(),
            });
        }
        let layers = (0..layer_count)
            .map(|_| r.i32("layers"))
            .collect::<Result<Vec<_>>>()?;
        let count = r.u32("sentence_count")? as usize;
        if count == 0 {
            return Err(Error::Format {
                field: "sentence_count",
                reason: "at least one sentence is required".into(),
            });
        }
        Ok(DumpReader {
            r,
            dim,
            keep: vec![true; layers.len()],
            layers,
            count,
            next: 0,
            failed: false,
        })
    }

    /// Restricts the yielded matrices to `wanted`, in header order. Other
    /// layers are skipped without being stored.
    pub fn keep_layers(mut self, wanted: &[i32]) -> Result<Self> {
        if let Some(&missing) = wanted.iter().find(|l| !self.layers.contains(l)) {
            return Err(Error::MissingLayer(missing));
        }
        self.keep = self.layers.iter().map(|l| wanted.contains(l)).collect();
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Layers yielded by the iterator.
    pub fn layers(&self) -> Vec<i32> {
        self.layers
            .iter()
            .zip(&self.keep)
            .filter(|(_, &k)| k)
            .map(|(&l, _)| l)
            .collect()
    }

    pub fn sentence_count(&self) -> usize {
        self.count
    }

    fn read_record(&mut self) -> Result<SentenceEmbedding> {
        let record = self.next;
        let r = &mut self.r;
        r.record = record;
        let text_len = r.u32("text_len")? as usize;
        let mut text = vec![0u8; text_len];
        r.fill(&mut text, "text")?;
        let text = String::from_utf8(text).map_err(|e| Error::Format {
            field: "text",
            reason: format!("record {record}: {e}"),
        })?;
        let n = r.u32("token_count")? as usize;
        if n == 0 {
            return Err(Error::Format {
                field: "token_count",
                reason: format!("record {record} has no tokens"),
            });
        }
        let mut raw = vec![0u8; n * 4];
        r.fill(&mut raw, "token_ids")?;
        let token_ids = raw
            .chunks_exact(4)
            .map(|c| u32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        let mut mats = Vec::new();
        let mut raw = vec![0u8; n * self.dim * 4];
        for &keep in &self.keep {
            r.fill(&mut raw, "vectors")?;
            if !keep {
                continue;
            }
            let values: Vec<f32> = raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect();
            mats.push(Array2::from_shape_vec((n, self.dim), values).expect("shape matches length"));
        }
        Ok(SentenceEmbedding {
            text,
            token_ids,
            layers: mats,
        })
    }
}

impl<R: Read> Iterator for DumpReader<R> {
    type Item = Result<SentenceEmbedding>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed || self.next >= self.count {
            return None;
        }
        let item = self.read_record();
        self.failed = item.is_err();
        self.next += 1;
        Some(item)
    }
}

/// Reads a TED1 stream. Truncation errors carry the index of the sentence
/// record being read (header fields report record 0).
pub fn read_dump<R: Read>(source: R) -> Result<EmbeddingTensor> {
    let reader = DumpReader::new(source)?;
    let (dim, layers) = (reader.dim(), reader.layers());
    let mut sentences = Vec::with_capacity(reader.sentence_count().min(1 << 20));
    for s in reader {
        sentences.push(s?);
    }
    EmbeddingTensor::new(dim, layers, sentences)
}

/// Opens a TED1 file for streaming.
pub fn open_dump(path: impl AsRef<Path>) -> Result<DumpReader<BufReader<File>>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::file(path, e))?;
    DumpReader::new(BufReader::new(file))
}

pub fn save_dump(tensor: &EmbeddingTensor, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::file(path, e))?;
    write_dump(tensor, BufWriter::new(file))
}

pub fn load_dump(path: impl AsRef<Path>) -> Result<EmbeddingTensor> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::file(path, e))?;
    read_dump(BufReader::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn tiny() -> EmbeddingTensor {
        EmbeddingTensor::new(
            2,
            vec![1],
            vec![SentenceEmbedding {
                text: "a b".into(),
                token_ids: vec![7, 8],
                layers: vec![Array2::zeros((2, 2))],
            }],
        )
        .unwrap()
    }

    #[test]
    fn tiny_round_trip() {
        let t = tiny();
        let mut bytes = Vec::new();
        write_dump(&t, &mut bytes).unwrap();
        // header 4+4+4+4+4+4, record 4+3+4+8+16
        assert_eq!(bytes.len(), 24 + 35);
        assert_eq!(read_dump(bytes.as_slice()).unwrap(), t);
    }

    #[test]
    fn empty_sentence_list_is_a_format_error() {
        let t = EmbeddingTensor::new(2, vec![1], vec![]).unwrap();
        let err = write_dump(&t, Vec::new()).unwrap_err();
        assert!(matches!(
            err,
            Error::Format {
                field: "sentence_count",
                ..
            }
        ));
    }

    #[test]
    fn truncation_names_the_record() {
        let t = EmbeddingTensor::new(
            1,
            vec![-1, 12],
            vec![
                SentenceEmbedding {
                    text: "x".into(),
                    token_ids: vec![1],
                    layers: vec![array![[1.0]], array![[2.0]]],
                },
                SentenceEmbedding {
                    text: "y".into(),
                    token_ids: vec![2, 3],
                    layers: vec![array![[1.0], [2.0]], array![[3.0], [4.0]]],
                },
            ],
        )
        .unwrap();
        let mut bytes = Vec::new();
        write_dump(&t, &mut bytes).unwrap();
        bytes.truncate(bytes.len() - 3);
        match read_dump(bytes.as_slice()) {
            Err(Error::Truncated { record: 1, field }) => assert_eq!(field, "vectors"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn wrong_magic_is_unsupported_version() {
        let mut bytes = Vec::new();
        write_dump(&tiny(), &mut bytes).unwrap();
        bytes[3] = b'2';
        assert!(matches!(
            read_dump(bytes.as_slice()),
            Err(Error::UnsupportedVersion(_))
        ));
        bytes[0] = b'X';
        assert!(matches!(
            read_dump(bytes.as_slice()),
            Err(Error::Format { field: "magic", .. })
        ));
    }

    #[test]
    fn sink_failure_reports_offset() {
        struct Limited(usize);
        impl Write for Limited {
            fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
                if self.0 < buf.len() {
                    return Err(io::Error::other("full"));
                }
                self.0 -= buf.len();
                Ok(buf.len())
            }
            fn flush(&mut self) -> io::Result<()> {
                Ok(())
            }
        }
        match write_dump(&tiny(), Limited(10)) {
            Err(Error::Io { offset, .. }) => assert_eq!(offset, 8),
            other => panic!("unexpected {other:?}"),
        }
    }
}
