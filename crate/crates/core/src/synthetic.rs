//! Seeded toy data in the MuSiQue record layout, plus hashed bag-of-words
//! embeddings, for examples and tests that need no downloads.
//!
//! Each query is a chain `e0 → e1 → … → e_h` over invented entity names.
//! Gold paragraph `j` states the link `e_j → e_{j+1}`; the answer is `e_h`.
//! Distractor paragraphs mention `e0` or the relation word without carrying
//! a link of the chain.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use serde_json::json;

use crate::corpus::{ingest_musique_text, CorpusStore, Dataset, Query};
use crate::error::{Error, Result};
use crate::retrieval::{tokenize, EmbeddingMatrix, QueryEncoder};
use crate::seed::{rng_for, stable_hash};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SyntheticSpec {
    /// Number of queries per hop class.
    pub per_hop: BTreeMap<u8, usize>,
    pub distractors_per_query: usize,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn new(two: usize, three: usize, four: usize, seed: u64) -> Self {
        SyntheticSpec {
            per_hop: [(2, two), (3, three), (4, four)].into_iter().collect(),
            distractors_per_query: 8,
            seed,
        }
    }

    pub fn with_distractors(mut self, n: usize) -> Self {
        self.distractors_per_query = n;
        self
    }
}

const SYLLABLES: &[&str] = &[
    "ka", "lo", "mi", "ren", "sa", "tor", "vel", "du", "ne", "qua", "ri", "zo", "pel", "an", "fi", "gor", "hu", "ix",
    "jan", "mo",
];

const FILLER: &[&str] = &[
    "river", "council", "archive", "festival", "harbor", "museum", "valley", "treaty", "orchestra", "railway",
    "province", "library", "monastery", "garrison", "market", "academy",
];

const TOPICS: &[&str] = &[
    "amber", "basalt", "cedar", "delta", "ember", "falcon", "granite", "heron", "iris", "juniper", "kestrel", "lotus",
];

fn entity(rng: &mut impl Rng, serial: usize) -> String {
    let n = rng.random_range(2..=3);
    let mut s: String = (0..n).map(|_| *SYLLABLES.choose(rng).unwrap()).collect();
    s.push_str(&serial.to_string());
    let mut c = s.chars();
    c.next().map(|f| f.to_uppercase().chain(c).collect()).unwrap_or_default()
}

fn filler(rng: &mut impl Rng, n: usize) -> String {
    (0..n).map(|_| *FILLER.choose(rng).unwrap()).collect::<Vec<_>>().join(" ")
}

fn question(hops: u8, start: &str, topic: &str) -> String {
    let chain = "the partner of ".repeat(usize::from(hops));
    let tail = if hops == 4 { " as recorded by whom" } else { "" };
    format!("What is {chain}{start} in the {topic} registry{tail}?")
}

/// One JSON line per query.
pub fn musique_lines(spec: &SyntheticSpec) -> Vec<String> {
    let mut rng = rng_for(spec.seed, "synthetic-musique");
    let mut serial = 0usize;
    let mut out = Vec::new();
    for (&hops, &count) in &spec.per_hop {
        for i in 0..count {
            let chain: Vec<String> = (0..=usize::from(hops))
                .map(|_| {
                    serial += 1;
                    entity(&mut rng, serial)
                })
                .collect();
            let topic = *TOPICS.choose(&mut rng).unwrap();
            let mut paragraphs = Vec::new();
            for j in 0..usize::from(hops) {
                let body = format!(
                    "{} is the partner of {} in the {topic} registry of the {}.",
                    chain[j + 1],
                    chain[j],
                    filler(&mut rng, 2)
                );
                paragraphs.push(json!({"title": chain[j], "paragraph_text": body, "is_supporting": true}));
            }
            for _ in 0..spec.distractors_per_query {
                serial += 1;
                let other = entity(&mut rng, serial);
                let body = if rng.random_bool(0.5) {
                    format!("{other} visited the {} near {}.", filler(&mut rng, 2), chain[0])
                } else {
                    format!("{other} is the partner of a {} in the {}.", filler(&mut rng, 1), filler(&mut rng, 2))
                };
                paragraphs.push(json!({"title": other, "paragraph_text": body, "is_supporting": false}));
            }
            paragraphs.shuffle(&mut rng);
            for (idx, p) in paragraphs.iter_mut().enumerate() {
                p["idx"] = json!(idx);
            }
            // Supporting paragraphs must appear in chain order for the gold
            // annotation order to follow the chain.
            let mut gold: Vec<serde_json::Value> =
                paragraphs.iter().filter(|p| p["is_supporting"] == true).cloned().collect();
            gold.sort_by_key(|p| {
                let t = p["title"].as_str().unwrap_or_default();
                chain.iter().position(|c| c == t)
            });
            let mut g = gold.into_iter();
            for p in paragraphs.iter_mut() {
                if p["is_supporting"] == true {
                    *p = g.next().unwrap();
                }
            }
            let answer = chain[usize::from(hops)].clone();
            let rec = json!({
                "id": format!("{hops}hop__syn{i:04}"),
                "question": question(hops, &chain[0], topic),
                "answer": answer,
                "answer_aliases": [answer.to_lowercase()],
                "paragraphs": paragraphs,
                "answerable": true,
            });
            out.push(rec.to_string());
        }
    }
    out
}

pub fn write_musique(path: &Path, spec: &SyntheticSpec) -> Result<()> {
    let mut text = musique_lines(spec).join("\n");
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// The synthetic records, ingested.
pub fn musique_dataset(spec: &SyntheticSpec) -> Result<Dataset> {
    ingest_musique_text(&musique_lines(spec).join("\n"), Path::new("<synthetic>"))
}

/// Signed feature hashing of the token multiset into `dim` buckets.
pub fn hashed_embedding(text: &str, dim: usize) -> Vec<f32> {
    let mut v = vec![0f32; dim];
    for t in tokenize(text) {
        let h = stable_hash(&[t.as_bytes()]);
        let slot = (h % dim as u64) as usize;
        v[slot] += if (h >> 63) == 1 { -1.0 } else { 1.0 };
    }
    v
}

pub fn hashed_embeddings(corpus: &CorpusStore, dim: usize) -> Result<EmbeddingMatrix> {
    let rows = corpus
        .passages()
        .iter()
        .map(|p| (p.id.clone(), hashed_embedding(&p.display_text(), dim)))
        .collect();
    EmbeddingMatrix::from_rows(dim, rows)
}

/// Query vectors keyed by query id, for canned-query dense runs.
pub fn hashed_query_embeddings(queries: &[Query], dim: usize) -> Result<EmbeddingMatrix> {
    let rows = queries
        .iter()
        .map(|q| (q.id.clone(), hashed_embedding(&q.text, dim)))
        .collect();
    EmbeddingMatrix::from_rows(dim, rows)
}

#[derive(Debug, Clone, Copy)]
pub struct HashedEncoder {
    pub dim: usize,
}

impl QueryEncoder for HashedEncoder {
    fn encode(&self, query: &Query) -> Result<Vec<f32>> {
        Ok(hashed_embedding(&query.text, self.dim))
    }
}
