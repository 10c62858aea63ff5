//! Exhaustive cosine search over precomputed embeddings.
//!
//! Sidecar file layouts:
//!
//! * binary: `u32 dim`, `u32 count`, then `count` records of
//!   `u32 id_len`, `id_len` UTF-8 bytes, `dim` × `f32`; all little-endian.
//! * text (`.txt`/`.tsv`): a `dim count` header line, then one line per
//!   passage: the id followed by `dim` whitespace-separated decimals.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::Arc;

use super::{check_k, rank_top_k, RetrievedPassage, Retriever};
use crate::corpus::{CorpusStore, Query};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    dim: usize,
    data: Vec<f32>,
    norms: Vec<f64>,
    ids: Vec<String>,
    by_id: HashMap<String, usize>,
}

impl EmbeddingMatrix {
    pub fn from_rows(dim: usize, rows: Vec<(String, Vec<f32>)>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("embedding dim must be positive"));
        }
        let mut data = Vec::with_capacity(dim * rows.len());
        let mut ids = Vec::with_capacity(rows.len());
        let mut by_id = HashMap::with_capacity(rows.len());
        for (id, row) in rows {
            if row.len() != dim {
                return Err(Error::invalid(format!("row {id} has {} entries, expected {dim}", row.len())));
            }
            if by_id.insert(id.clone(), ids.len()).is_some() {
                return Err(Error::invalid(format!("duplicate embedding id {id}")));
            }
            ids.push(id);
            data.extend(row);
        }
        let norms = data.chunks(dim).map(l2_norm).collect();
        Ok(EmbeddingMatrix {
            dim,
            data,
            norms,
            ids,
            by_id,
        })
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

    pub fn row(&self, ordinal: usize) -> &[f32] {
        &self.data[ordinal * self.dim..(ordinal + 1) * self.dim]
    }

    pub fn norm(&self, ordinal: usize) -> f64 {
        self.norms[ordinal]
    }

    pub fn id(&self, ordinal: usize) -> &str {
        &self.ids[ordinal]
    }

    pub fn vector(&self, id: &str) -> Option<&[f32]> {
        self.by_id.get(id).map(|&o| self.row(o))
    }

    /// Reorders rows so ordinals follow corpus order. Every corpus passage
    /// must have a row; extra rows are dropped.
    pub fn aligned_to(&self, corpus: &CorpusStore) -> Result<Self> {
        let mut rows = Vec::with_capacity(corpus.len());
        for p in corpus.passages() {
            let v = self
                .vector(&p.id)
                .ok_or_else(|| Error::invalid(format!("no embedding for passage {}", p.id)))?;
            rows.push((p.id.clone(), v.to_vec()));
        }
        Self::from_rows(self.dim, rows)
    }

    /// Dispatches on extension: `.txt`/`.tsv` are read as text, anything else
    /// as binary.
    pub fn load(path: &Path) -> Result<Self> {
        match path.extension().and_then(|e| e.to_str()) {
            Some("txt") | Some("tsv") => Self::read_text(path),
            _ => Self::read_binary(path),
        }
    }

    pub fn read_binary(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut r = BufReader::new(file);
        let io = |e| Error::io(path, e);
        let dim = read_u32(&mut r).map_err(io)? as usize;
        let count = read_u32(&mut r).map_err(io)? as usize;
        let mut rows = Vec::with_capacity(count);
        for _ in 0..count {
            let id_len = read_u32(&mut r).map_err(io)? as usize;
            let mut id = vec![0u8; id_len];
            r.read_exact(&mut id).map_err(io)?;
            let id = String::from_utf8(id).map_err(|e| Error::invalid(format!("embedding id not UTF-8: {e}")))?;
            let mut buf = vec![0u8; dim * 4];
            r.read_exact(&mut buf).map_err(io)?;
            let row = buf
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect();
            rows.push((id, row));
        }
        let mut trailing = [0u8; 1];
        if r.read(&mut trailing).map_err(io)? != 0 {
            return Err(Error::invalid(format!("{}: trailing bytes after {count} records", path.display())));
        }
        Self::from_rows(dim, rows)
    }

    pub fn write_binary(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let io = |e| Error::io(path, e);
        w.write_all(&(self.dim as u32).to_le_bytes()).map_err(io)?;
        w.write_all(&(self.len() as u32).to_le_bytes()).map_err(io)?;
        for o in 0..self.len() {
            let id = self.id(o).as_bytes();
            w.write_all(&(id.len() as u32).to_le_bytes()).map_err(io)?;
            w.write_all(id).map_err(io)?;
            for v in self.row(o) {
                w.write_all(&v.to_le_bytes()).map_err(io)?;
            }
        }
        w.flush().map_err(io)
    }

    pub fn read_text(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut lines = BufReader::new(file).lines().enumerate();
        let bad = |line: usize, msg: String| Error::MalformedRecord {
            path: path.to_path_buf(),
            line,
            message: msg,
        };
        let (_, header) = lines.next().ok_or_else(|| bad(1, "missing header".into()))?;
        let header = header.map_err(|e| Error::io(path, e))?;
        let nums: Vec<usize> = header
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| bad(1, format!("bad header: {e}")))?;
        let [dim, count] = nums[..] else {
            return Err(bad(1, "header must be `dim count`".into()));
        };
        let mut rows = Vec::with_capacity(count);
        for (i, line) in lines {
            let line = line.map_err(|e| Error::io(path, e))?;
            let mut fields = line.split_whitespace();
            let Some(id) = fields.next() else { continue };
            let row: Vec<f32> = fields
                .map(str::parse)
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| bad(i + 1, format!("bad value: {e}")))?;
            if row.len() != dim {
                return Err(bad(i + 1, format!("{} values, expected {dim}", row.len())));
            }
            rows.push((id.to_string(), row));
        }
        if rows.len() != count {
            return Err(bad(1, format!("header declares {count} rows, found {}", rows.len())));
        }
        Self::from_rows(dim, rows)
    }

    pub fn write_text(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let io = |e| Error::io(path, e);
        writeln!(w, "{} {}", self.dim, self.len()).map_err(io)?;
        for o in 0..self.len() {
            write!(w, "{}", self.id(o)).map_err(io)?;
            for v in self.row(o) {
                write!(w, " {v}").map_err(io)?;
            }
            writeln!(w).map_err(io)?;
        }
        w.flush().map_err(io)
    }
}

fn read_u32(r: &mut impl Read) -> std::io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn l2_norm(v: &[f32]) -> f64 {
    v.iter().map(|&x| f64::from(x) * f64::from(x)).sum::<f64>().sqrt()
}

fn dot(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| f64::from(x) * f64::from(y)).sum()
}

/// Cosine similarity; 0 when either vector has zero norm.
pub fn cosine(a: &[f32], b: &[f32]) -> f64 {
    let denom = l2_norm(a) * l2_norm(b);
    if denom == 0.0 {
        0.0
    } else {
        dot(a, b) / denom
    }
}

pub fn search_dense(embeddings: &EmbeddingMatrix, query_vector: &[f32], k: usize) -> Result<Vec<RetrievedPassage>> {
    check_k(k)?;
    if query_vector.len() != embeddings.dim() {
        return Err(Error::invalid(format!(
            "query vector has dim {}, index has {}",
            query_vector.len(),
            embeddings.dim()
        )));
    }
    let qn = l2_norm(query_vector);
    let scored = (0..embeddings.len())
        .map(|o| {
            let denom = qn * embeddings.norm(o);
            let s = if denom == 0.0 {
                0.0
            } else {
                dot(query_vector, embeddings.row(o)) / denom
            };
            (embeddings.id(o).to_string(), s)
        })
        .collect();
    Ok(rank_top_k(scored, k))
}

/// Produces the query-side vector for dense search.
pub trait QueryEncoder: Send + Sync {
    fn encode(&self, query: &Query) -> Result<Vec<f32>>;
}

/// Query vectors looked up by query id from a sidecar file.
#[derive(Debug, Clone)]
pub struct CannedQueryVectors(pub Arc<EmbeddingMatrix>);

impl QueryEncoder for CannedQueryVectors {
    fn encode(&self, query: &Query) -> Result<Vec<f32>> {
        self.0
            .vector(&query.id)
            .map(<[f32]>::to_vec)
            .ok_or_else(|| Error::UnknownQuery(query.id.clone()))
    }
}

pub struct DenseRetriever {
    embeddings: Arc<EmbeddingMatrix>,
    encoder: Box<dyn QueryEncoder>,
}

impl DenseRetriever {
    pub fn new(embeddings: Arc<EmbeddingMatrix>, encoder: Box<dyn QueryEncoder>) -> Self {
        DenseRetriever { embeddings, encoder }
    }
}

impl Retriever for DenseRetriever {
    fn name(&self) -> &str {
        "Dense"
    }

    fn retrieve(&self, query: &Query, k: usize) -> Result<Vec<RetrievedPassage>> {
        let v = self.encoder.encode(query)?;
        search_dense(&self.embeddings, &v, k)
    }
}
