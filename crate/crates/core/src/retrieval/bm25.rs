//! Okapi BM25 over an in-memory inverted index.
//!
//! ```text
//! score(D, Q) = Σ_t idf(t) · tf·(k1+1) / (tf + k1·(1 − b + b·|D|/avgdl))
//! idf(t)      = ln(1 + (N − df + 0.5) / (df + 0.5))
//! ```
//!
//! Query terms are a bag: a term repeated in the query contributes once per
//! occurrence.

use std::collections::HashMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{check_k, rank_top_k, tokenize, RetrievedPassage, Retriever};
use crate::corpus::{CorpusStore, Query};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Bm25Params { k1: 1.2, b: 0.75 }
    }
}

impl Bm25Params {
    pub fn new(k1: f64, b: f64) -> Result<Self> {
        if !(k1 > 0.0 && k1.is_finite()) {
            return Err(Error::invalid(format!("k1 must be > 0, got {k1}")));
        }
        if !(0.0..=1.0).contains(&b) {
            return Err(Error::invalid(format!("b must be in [0, 1], got {b}")));
        }
        Ok(Bm25Params { k1, b })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Posting {
    pub ordinal: u32,
    pub tf: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvertedIndex {
    /// Postings sorted by ordinal.
    postings: HashMap<String, Vec<Posting>>,
    doc_lengths: Vec<u32>,
    avg_doc_len: f64,
    passage_ids: Vec<String>,
}

impl InvertedIndex {
    pub fn num_docs(&self) -> usize {
        self.doc_lengths.len()
    }

    pub fn avg_doc_len(&self) -> f64 {
        self.avg_doc_len
    }

    pub fn doc_len(&self, ordinal: usize) -> u32 {
        self.doc_lengths[ordinal]
    }

    pub fn doc_lengths(&self) -> &[u32] {
        &self.doc_lengths
    }

    pub fn postings(&self, term: &str) -> &[Posting] {
        self.postings.get(term).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn doc_freq(&self, term: &str) -> usize {
        self.postings(term).len()
    }

    pub fn vocabulary_size(&self) -> usize {
        self.postings.len()
    }

    pub fn terms(&self) -> impl Iterator<Item = &str> {
        self.postings.keys().map(String::as_str)
    }

    pub fn passage_id(&self, ordinal: usize) -> &str {
        &self.passage_ids[ordinal]
    }

    pub fn term_freq(&self, term: &str, ordinal: usize) -> u32 {
        let list = self.postings(term);
        match list.binary_search_by_key(&(ordinal as u32), |p| p.ordinal) {
            Ok(i) => list[i].tf,
            Err(_) => 0,
        }
    }
}

/// Indexes the tokens of title and body for every passage, in corpus order.
pub fn build_bm25_index(corpus: &CorpusStore) -> Result<InvertedIndex> {
    if corpus.is_empty() {
        return Err(Error::invalid("cannot index an empty corpus"));
    }
    let mut postings: HashMap<String, Vec<Posting>> = HashMap::new();
    let mut doc_lengths = Vec::with_capacity(corpus.len());
    let mut passage_ids = Vec::with_capacity(corpus.len());
    for (ordinal, p) in corpus.passages().iter().enumerate() {
        let mut tokens = p.title.as_deref().map(tokenize).unwrap_or_default();
        tokens.extend(tokenize(&p.body));
        doc_lengths.push(tokens.len() as u32);
        passage_ids.push(p.id.clone());
        let mut tf: HashMap<String, u32> = HashMap::new();
        for t in tokens {
            *tf.entry(t).or_default() += 1;
        }
        for (term, count) in tf {
            postings.entry(term).or_default().push(Posting {
                ordinal: ordinal as u32,
                tf: count,
            });
        }
    }
    let total: u64 = doc_lengths.iter().map(|&l| u64::from(l)).sum();
    let avg_doc_len = total as f64 / doc_lengths.len() as f64;
    Ok(InvertedIndex {
        postings,
        doc_lengths,
        avg_doc_len,
        passage_ids,
    })
}

pub fn idf(num_docs: usize, doc_freq: usize) -> f64 {
    let n = num_docs as f64;
    let df = doc_freq as f64;
    (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
}

fn saturation(tf: u32, doc_len: u32, avg_doc_len: f64, params: Bm25Params) -> f64 {
    let tf = f64::from(tf);
    let norm = 1.0 - params.b + params.b * f64::from(doc_len) / avg_doc_len;
    tf * (params.k1 + 1.0) / (tf + params.k1 * norm)
}

pub fn bm25_score(index: &InvertedIndex, params: Bm25Params, query_terms: &[String], ordinal: usize) -> f64 {
    assert!(ordinal < index.num_docs(), "ordinal {ordinal} out of range");
    let mut score = 0.0;
    for term in query_terms {
        let tf = index.term_freq(term, ordinal);
        if tf == 0 {
            continue;
        }
        let w = idf(index.num_docs(), index.doc_freq(term));
        score += w * saturation(tf, index.doc_len(ordinal), index.avg_doc_len, params);
    }
    score
}

/// Term-at-a-time top-k search; only documents with a positive score are
/// returned.
pub fn search_bm25(index: &InvertedIndex, params: Bm25Params, query_text: &str, k: usize) -> Vec<RetrievedPassage> {
    let terms = tokenize(query_text);
    let mut acc = vec![0.0f64; index.num_docs()];
    let mut touched = vec![false; index.num_docs()];
    for term in &terms {
        let list = index.postings(term);
        if list.is_empty() {
            continue;
        }
        let w = idf(index.num_docs(), list.len());
        for p in list {
            let o = p.ordinal as usize;
            acc[o] += w * saturation(p.tf, index.doc_len(o), index.avg_doc_len, params);
            touched[o] = true;
        }
    }
    let scored: Vec<(String, f64)> = touched
        .iter()
        .enumerate()
        .filter(|&(o, &t)| t && acc[o] > 0.0)
        .map(|(o, _)| (index.passage_id(o).to_string(), acc[o]))
        .collect();
    rank_top_k(scored, k)
}

#[derive(Debug, Clone)]
pub struct Bm25Retriever {
    index: Arc<InvertedIndex>,
    params: Bm25Params,
}

impl Bm25Retriever {
    pub fn new(index: Arc<InvertedIndex>, params: Bm25Params) -> Self {
        Bm25Retriever { index, params }
    }

    pub fn index(&self) -> &InvertedIndex {
        &self.index
    }
}

impl Retriever for Bm25Retriever {
    fn name(&self) -> &str {
        "BM25"
    }

    fn retrieve(&self, query: &Query, k: usize) -> Result<Vec<RetrievedPassage>> {
        check_k(k)?;
        Ok(search_bm25(&self.index, self.params, &query.text, k))
    }
}
