//! Static word-vector tables and per-document contextual embeddings (CEMB).

use std::collections::HashMap;
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::Path;

use ndarray::{Array2, ArrayView2};

use crate::corpus::{Document, Token};
use crate::error::{Error, Result};

/// Word → vector map with a fallback vector for unseen words.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    index: HashMap<String, usize>,
    vectors: Vec<f32>,
    unk: Vec<f32>,
}

impl EmbeddingTable {
    /// Builds a table from `(word, vector)` pairs. The first occurrence of a
    /// duplicated word wins. The unknown vector is the component-wise mean.
    pub fn from_pairs<I, S>(dim: usize, pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, Vec<f32>)>,
        S: Into<String>,
    {
        let mut table = EmbeddingTable {
            dim,
            index: HashMap::new(),
            vectors: Vec::new(),
            unk: vec![0.0; dim],
        };
        for (k, (word, vector)) in pairs.into_iter().enumerate() {
            if vector.len() != dim {
                return Err(Error::DimMismatch {
                    line: k + 1,
                    expected: dim,
                    found: vector.len(),
                });
            }
            table.insert(word.into(), &vector);
        }
        table.finish();
        Ok(table)
    }

    fn insert(&mut self, word: String, vector: &[f32]) {
        if self.index.contains_key(&word) {
            return;
        }
        self.index.insert(word, self.index.len());
        self.vectors.extend_from_slice(vector);
    }

    fn finish(&mut self) {
        let n = self.index.len();
        let mut sum = vec![0.0f64; self.dim];
        for row in self.vectors.chunks_exact(self.dim.max(1)) {
            for (s, &v) in sum.iter_mut().zip(row) {
                *s += v as f64;
            }
        }
        self.unk = if n == 0 {
            vec![0.0; self.dim]
        } else {
            sum.into_iter().map(|s| (s / n as f64) as f32).collect()
        };
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    pub fn unk(&self) -> &[f32] {
        &self.unk
    }

    /// Exact-key lookup without case folding.
    pub fn get(&self, word: &str) -> Option<&[f32]> {
        self.index
            .get(word)
            .map(|&i| &self.vectors[i * self.dim..(i + 1) * self.dim])
    }

    /// Lowercased lookup falling back to the unknown vector.
    pub fn vector_for(&self, surface: &str) -> &[f32] {
        self.get(&surface.to_lowercase()).unwrap_or(&self.unk)
    }

    /// One row per token (see [`EmbeddingTable::vector_for`]).
    pub fn lookup_sequence(&self, tokens: &[Token]) -> Array2<f32> {
        let mut out = Array2::zeros((tokens.len(), self.dim));
        for (mut row, tok) in out.rows_mut().into_iter().zip(tokens) {
            row.assign(&ndarray::ArrayView1::from(self.vector_for(&tok.surface)));
        }
        out
    }
}

/// Reads a whitespace-separated word-vector text file.
///
/// The dimension comes from the first record. A leading `<count> <dim>`
/// header line, as written by word2vec, is recognised and skipped.
pub fn load_table(path: &Path) -> Result<EmbeddingTable> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_table(BufReader::new(file)).map_err(|e| e.in_file(path))
}

pub fn read_table(reader: impl BufRead) -> Result<EmbeddingTable> {
    let mut table: Option<EmbeddingTable> = None;
    let mut row = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::io("<embeddings>", e))?;
        let mut fields = line.split_whitespace();
        let Some(word) = fields.next() else {
            continue;
        };
        row.clear();
        for f in fields {
            let v: f32 = f.parse().map_err(|_| Error::MalformedLine {
                line: line_no,
                reason: format!("non-numeric vector component {f:?}"),
            })?;
            row.push(v);
        }
        if table.is_none() {
            if line_no == 1 && row.len() == 1 && word.parse::<usize>().is_ok() {
                let dim = row[0] as usize;
                if dim == 0 {
                    return Err(Error::EmptyFile);
                }
                table = Some(EmbeddingTable::from_pairs(dim, Vec::<(String, Vec<f32>)>::new())?);
                continue;
            }
            if row.is_empty() {
                return Err(Error::DimMismatch {
                    line: line_no,
                    expected: 1,
                    found: 0,
                });
            }
            table = Some(EmbeddingTable::from_pairs(row.len(), Vec::<(String, Vec<f32>)>::new())?);
        }
        let t = table.as_mut().expect("table initialised");
        if row.len() != t.dim {
            return Err(Error::DimMismatch {
                line: line_no,
                expected: t.dim,
                found: row.len(),
            });
        }
        t.insert(word.to_string(), &row);
    }
    let mut table = table.ok_or(Error::EmptyFile)?;
    if table.is_empty() {
        return Err(Error::EmptyFile);
    }
    table.finish();
    Ok(table)
}

/// `[prev; cur; next]` for token `i`, with `unk` standing in for missing neighbours.
pub fn context_concat(rows: ArrayView2<'_, f32>, i: usize, unk: &[f32]) -> Result<Vec<f32>> {
    let (t, d) = rows.dim();
    if i >= t {
        return Err(Error::IndexOutOfRange { index: i, len: t });
    }
    if unk.len() != d {
        return Err(Error::ShapeMismatch(format!(
            "unknown vector has length {}, rows have width {d}",
            unk.len()
        )));
    }
    let mut out = Vec::with_capacity(3 * d);
    if i == 0 {
        out.extend_from_slice(unk);
    } else {
        out.extend(rows.row(i - 1).iter());
    }
    out.extend(rows.row(i).iter());
    if i + 1 == t {
        out.extend_from_slice(unk);
    } else {
        out.extend(rows.row(i + 1).iter());
    }
    Ok(out)
}

const CEMB_MAGIC: &[u8; 4] = b"CEMB";
const CEMB_VERSION: u32 = 1;

/// Token-aligned contextual vectors for a single document.
#[derive(Clone, Debug, PartialEq)]
pub struct ContextualEmbeddings {
    pub doc_id: String,
    pub matrix: Array2<f32>,
}

impl ContextualEmbeddings {
    pub fn dim(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn token_count(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn check_document(&self, doc: &Document) -> Result<()> {
        if self.token_count() != doc.tokens.len() {
            return Err(Error::TokenCountMismatch {
                doc_id: doc.id.clone(),
                tokens: doc.tokens.len(),
                rows: self.token_count(),
            });
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let id = self.doc_id.as_bytes();
        let (t, d) = self.matrix.dim();
        let mut out = Vec::with_capacity(20 + id.len() + 4 * t * d);
        out.extend_from_slice(CEMB_MAGIC);
        out.extend_from_slice(&CEMB_VERSION.to_le_bytes());
        out.extend_from_slice(&(id.len() as u32).to_le_bytes());
        out.extend_from_slice(id);
        out.extend_from_slice(&(t as u32).to_le_bytes());
        out.extend_from_slice(&(d as u32).to_le_bytes());
        for v in self.matrix.iter() {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut cur = Cursor { bytes, pos: 0 };
        if cur.take(4)? != CEMB_MAGIC {
            return Err(Error::BadMagic { expected: "CEMB" });
        }
        let version = cur.u32()?;
        if version != CEMB_VERSION {
            return Err(Error::ShapeMismatch(format!("unsupported CEMB version {version}")));
        }
        let id_len = cur.u32()? as usize;
        let doc_id = String::from_utf8(cur.take(id_len)?.to_vec())
            .map_err(|_| Error::ShapeMismatch("CEMB document id is not UTF-8".into()))?;
        let t = cur.u32()? as usize;
        let d = cur.u32()? as usize;
        let expected = t
            .checked_mul(d)
            .and_then(|n| n.checked_mul(4))
            .ok_or_else(|| Error::ShapeMismatch("CEMB header overflows".into()))?;
        let payload = &bytes[cur.pos..];
        if payload.len() < expected {
            return Err(Error::TruncatedPayload {
                expected,
                found: payload.len(),
            });
        }
        if payload.len() > expected {
            return Err(Error::ShapeMismatch(format!(
                "CEMB payload has {} trailing bytes",
                payload.len() - expected
            )));
        }
        let values: Vec<f32> = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        let matrix = Array2::from_shape_vec((t, d), values)
            .map_err(|e| Error::ShapeMismatch(e.to_string()))?;
        Ok(ContextualEmbeddings { doc_id, matrix })
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos + n;
        if end > self.bytes.len() {
            return Err(Error::TruncatedPayload {
                expected: end,
                found: self.bytes.len(),
            });
        }
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

pub fn load_contextual(path: &Path) -> Result<ContextualEmbeddings> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    ContextualEmbeddings::from_bytes(&bytes).map_err(|e| e.in_file(path))
}

/// Loads the CEMB file for `doc` and checks it against the token count.
pub fn load_contextual_for(path: &Path, doc: &Document) -> Result<ContextualEmbeddings> {
    let emb = load_contextual(path)?;
    emb.check_document(doc)?;
    Ok(emb)
}

pub fn write_contextual(path: &Path, emb: &ContextualEmbeddings) -> Result<()> {
    fs::write(path, emb.to_bytes()).map_err(|e| Error::io(path, e))
}
