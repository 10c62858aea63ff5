//! Dataset ingestion, chunking and the deduplicated retrieval corpus.
//!
//! Three line-delimited record layouts are understood:
//!
//! * `musique`: one question per line with its paragraph list; paragraphs
//!   flagged `is_supporting` are the gold passages, the others form the
//!   query's distractor pool.
//! * `wiki2hop`: 2WikiMultihopQA records (`context` as `[title, sentences]`
//!   pairs, `supporting_facts` as `[title, sentence_idx]`). The ten context
//!   paragraphs become the query's candidate list. A JSON array file is
//!   accepted as well as one record per line.
//! * `multihoprag`: document lines (`title`, `body`) and query lines
//!   (`query`, `answer`, `evidence_list`) interleaved in one file. Documents
//!   are chunked; each evidence fact resolves to the chunk of its titled
//!   document with the largest token overlap.
//!
//! Passage ids are content hashes of the whitespace-normalized title and
//! body, which is also what makes deduplication exact.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::retrieval::tokenize;
use crate::seed::rng_for;

pub const MIN_HOPS: u8 = 2;
pub const MAX_HOPS: u8 = 4;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Passage {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub title: Option<String>,
    pub body: String,
    pub source: String,
}

impl Passage {
    /// Builds a passage whose id is the content hash of `(title, body)`.
    pub fn new(title: Option<&str>, body: &str, source: &str) -> Result<Self> {
        let title = title.map(collapse_ws).filter(|t| !t.is_empty());
        let body = collapse_ws(body);
        if body.is_empty() {
            return Err(Error::invalid("passage body is empty"));
        }
        Ok(Passage {
            id: content_id(title.as_deref(), &body),
            title,
            body,
            source: source.to_string(),
        })
    }

    /// `"title: body"`, or just the body for untitled passages.
    pub fn display_text(&self) -> String {
        match &self.title {
            Some(t) => format!("{t}: {}", self.body),
            None => self.body.clone(),
        }
    }
}

fn collapse_ws(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn content_id(title: Option<&str>, body: &str) -> String {
    let mut h = Sha256::new();
    h.update(title.unwrap_or("").as_bytes());
    h.update([0x1f]);
    h.update(body.as_bytes());
    let digest = h.finalize();
    let mut id = String::with_capacity(17);
    id.push('p');
    for b in &digest[..8] {
        id.push_str(&format!("{b:02x}"));
    }
    id
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Query {
    pub id: String,
    pub text: String,
    pub hops: u8,
    pub answers: Vec<String>,
    /// Supporting passages in annotation order.
    pub gold_ids: Vec<String>,
    /// Fixed candidate list for rerank-only datasets.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub candidate_ids: Option<Vec<String>>,
    /// Dataset-designated non-supporting passages for this query.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub distractor_ids: Vec<String>,
}

impl Query {
    pub fn is_gold(&self, passage_id: &str) -> bool {
        self.gold_ids.iter().any(|g| g == passage_id)
    }

    /// The pool distractors are sampled from: the dataset's own distractors,
    /// else the non-gold candidates.
    pub fn distractor_pool(&self) -> Vec<&str> {
        if !self.distractor_ids.is_empty() {
            return self.distractor_ids.iter().map(String::as_str).collect();
        }
        self.candidate_ids
            .iter()
            .flatten()
            .filter(|c| !self.is_gold(c))
            .map(String::as_str)
            .collect()
    }
}

/// Immutable once built; share it behind `Arc` or `&`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CorpusStore {
    passages: Vec<Passage>,
    by_id: HashMap<String, usize>,
    source_counts: BTreeMap<String, usize>,
}

impl CorpusStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts unless an identical `(title, body)` is already stored.
    /// Returns the passage id and whether it was newly added.
    pub fn insert(&mut self, passage: Passage) -> (String, bool) {
        if self.by_id.contains_key(&passage.id) {
            return (passage.id, false);
        }
        let id = passage.id.clone();
        *self.source_counts.entry(passage.source.clone()).or_default() += 1;
        self.by_id.insert(id.clone(), self.passages.len());
        self.passages.push(passage);
        (id, true)
    }

    pub fn get(&self, id: &str) -> Option<&Passage> {
        self.by_id.get(id).map(|&i| &self.passages[i])
    }

    pub fn require(&self, id: &str) -> Result<&Passage> {
        self.get(id).ok_or_else(|| Error::UnknownPassage(id.to_string()))
    }

    pub fn contains(&self, id: &str) -> bool {
        self.by_id.contains_key(id)
    }

    pub fn ordinal(&self, id: &str) -> Option<usize> {
        self.by_id.get(id).copied()
    }

    pub fn len(&self) -> usize {
        self.passages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.passages.is_empty()
    }

    /// Passages in insertion order; the index is the passage ordinal.
    pub fn passages(&self) -> &[Passage] {
        &self.passages
    }

    pub fn source_counts(&self) -> &BTreeMap<String, usize> {
        &self.source_counts
    }

    /// One JSON record per passage: `id`, `title`, `body`, `source`.
    pub fn write_dump(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        for p in &self.passages {
            serde_json::to_writer(&mut out, p)?;
            out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
        }
        out.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read_dump(path: &Path) -> Result<Self> {
        let mut store = CorpusStore::new();
        for (line_no, line) in read_lines(path)? {
            let p: Passage = serde_json::from_str(&line).map_err(|e| malformed(path, line_no, e))?;
            store.insert(p);
        }
        Ok(store)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetFormat {
    Musique,
    Wiki2hop,
    Multihoprag,
}

impl DatasetFormat {
    pub fn tag(self) -> &'static str {
        match self {
            DatasetFormat::Musique => "musique",
            DatasetFormat::Wiki2hop => "wiki2hop",
            DatasetFormat::Multihoprag => "multihoprag",
        }
    }
}

impl std::str::FromStr for DatasetFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "musique" => Ok(DatasetFormat::Musique),
            "wiki2hop" | "2wiki" | "2wikimultihopqa" => Ok(DatasetFormat::Wiki2hop),
            "multihoprag" => Ok(DatasetFormat::Multihoprag),
            other => Err(Error::invalid(format!("unknown dataset format {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChunkConfig {
    pub chunk_words: usize,
    pub overlap_words: usize,
}

impl Default for ChunkConfig {
    fn default() -> Self {
        ChunkConfig {
            chunk_words: 200,
            overlap_words: 0,
        }
    }
}

/// A record skipped during ingestion, with the reason.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rejection {
    pub line: usize,
    pub record_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    pub corpus: CorpusStore,
    pub queries: Vec<Query>,
    pub rejected: Vec<Rejection>,
}

impl Dataset {
    /// Query counts keyed by hop class.
    pub fn hop_histogram(&self) -> BTreeMap<u8, usize> {
        let mut h = BTreeMap::new();
        for q in &self.queries {
            *h.entry(q.hops).or_default() += 1;
        }
        h
    }

    pub fn query(&self, id: &str) -> Option<&Query> {
        self.queries.iter().find(|q| q.id == id)
    }
}

pub fn ingest_dataset(path: &Path, format: DatasetFormat) -> Result<Dataset> {
    ingest_dataset_with(path, format, ChunkConfig::default())
}

pub fn ingest_dataset_with(path: &Path, format: DatasetFormat, chunking: ChunkConfig) -> Result<Dataset> {
    let ds = match format {
        DatasetFormat::Musique => ingest_musique(path)?,
        DatasetFormat::Wiki2hop => ingest_wiki2hop(path)?,
        DatasetFormat::Multihoprag => ingest_multihoprag(path, chunking)?,
    };
    for r in &ds.rejected {
        log::warn!("{}:{}: skipped record {}: {}", path.display(), r.line, r.record_id, r.reason);
    }
    validate_queries(&ds.corpus, &ds.queries)?;
    Ok(ds)
}

/// Every gold and candidate id must resolve to a stored passage.
pub fn validate_queries(corpus: &CorpusStore, queries: &[Query]) -> Result<()> {
    for q in queries {
        let ids = q.gold_ids.iter().chain(q.candidate_ids.iter().flatten());
        for id in ids {
            if !corpus.contains(id) {
                return Err(Error::UnresolvedGold {
                    query_id: q.id.clone(),
                    passage_id: id.clone(),
                });
            }
        }
    }
    Ok(())
}

/// Hop class from an id prefix such as `2hop__...` or `3hop1__...`.
pub fn hops_from_id(id: &str) -> Option<u8> {
    let mut chars = id.chars();
    let digit = chars.next()?.to_digit(10)?;
    if chars.as_str().starts_with("hop") {
        u8::try_from(digit).ok()
    } else {
        None
    }
}

fn read_lines(path: &Path) -> Result<Vec<(usize, String)>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if !line.trim().is_empty() {
            out.push((i + 1, line));
        }
    }
    Ok(out)
}

fn malformed(path: &Path, line: usize, e: impl std::fmt::Display) -> Error {
    Error::MalformedRecord {
        path: path.to_path_buf(),
        line,
        message: e.to_string(),
    }
}

fn answer_list(answer: &str, aliases: &[String]) -> Vec<String> {
    let mut out: Vec<String> = Vec::with_capacity(1 + aliases.len());
    for a in std::iter::once(answer).chain(aliases.iter().map(String::as_str)) {
        let a = a.trim();
        if !a.is_empty() && !out.iter().any(|x| x == a) {
            out.push(a.to_string());
        }
    }
    out
}

fn hop_in_range(h: usize) -> Option<u8> {
    u8::try_from(h).ok().filter(|h| (MIN_HOPS..=MAX_HOPS).contains(h))
}

#[derive(Deserialize)]
struct MusiqueRecord {
    id: String,
    question: String,
    answer: String,
    #[serde(default)]
    answer_aliases: Vec<String>,
    paragraphs: Vec<MusiqueParagraph>,
}

#[derive(Deserialize)]
struct MusiqueParagraph {
    #[serde(default)]
    title: String,
    paragraph_text: String,
    #[serde(default)]
    is_supporting: bool,
}

/// MuSiQue-format records held in memory; `origin` only labels errors.
pub fn ingest_musique_text(text: &str, origin: &Path) -> Result<Dataset> {
    let lines: Vec<(usize, String)> = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| (i + 1, l.to_string()))
        .collect();
    let ds = musique_from_lines(origin, lines)?;
    validate_queries(&ds.corpus, &ds.queries)?;
    Ok(ds)
}

fn ingest_musique(path: &Path) -> Result<Dataset> {
    musique_from_lines(path, read_lines(path)?)
}

fn musique_from_lines(path: &Path, lines: Vec<(usize, String)>) -> Result<Dataset> {
    let mut corpus = CorpusStore::new();
    let mut queries = Vec::new();
    let mut rejected = Vec::new();
    for (line_no, line) in lines {
        let rec: MusiqueRecord = serde_json::from_str(&line).map_err(|e| malformed(path, line_no, e))?;
        let mut gold_ids = Vec::new();
        let mut distractor_ids = Vec::new();
        for p in &rec.paragraphs {
            let passage = Passage::new(Some(&p.title), &p.paragraph_text, "musique")
                .map_err(|e| malformed(path, line_no, e))?;
            let (id, _) = corpus.insert(passage);
            let bucket = if p.is_supporting { &mut gold_ids } else { &mut distractor_ids };
            if !bucket.contains(&id) {
                bucket.push(id);
            }
        }
        distractor_ids.retain(|d| !gold_ids.contains(d));
        let answers = answer_list(&rec.answer, &rec.answer_aliases);
        if answers.is_empty() {
            return Err(malformed(path, line_no, "empty answer"));
        }
        let parsed = hops_from_id(&rec.id).map(usize::from).unwrap_or(gold_ids.len());
        let Some(hops) = hop_in_range(parsed) else {
            rejected.push(Rejection {
                line: line_no,
                record_id: rec.id,
                reason: format!("hop count {parsed} outside {MIN_HOPS}..={MAX_HOPS}"),
            });
            continue;
        };
        if gold_ids.len() != usize::from(hops) {
            return Err(malformed(
                path,
                line_no,
                format!("{}: {} supporting paragraphs for a {hops}-hop question", rec.id, gold_ids.len()),
            ));
        }
        queries.push(Query {
            id: rec.id,
            text: rec.question,
            hops,
            answers,
            gold_ids,
            candidate_ids: None,
            distractor_ids,
        });
    }
    Ok(Dataset {
        corpus,
        queries,
        rejected,
    })
}

#[derive(Deserialize)]
struct WikiRecord {
    #[serde(alias = "id", rename = "_id")]
    id: String,
    question: String,
    answer: String,
    #[serde(default)]
    answer_aliases: Vec<String>,
    context: Vec<(String, Vec<String>)>,
    supporting_facts: Vec<(String, serde_json::Value)>,
}

fn ingest_wiki2hop(path: &Path) -> Result<Dataset> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let records: Vec<(usize, serde_json::Value)> = if text.trim_start().starts_with('[') {
        let arr: Vec<serde_json::Value> = serde_json::from_str(&text).map_err(|e| malformed(path, e.line(), e))?;
        arr.into_iter().enumerate().map(|(i, v)| (i + 1, v)).collect()
    } else {
        let mut out = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let v = serde_json::from_str(line).map_err(|e| malformed(path, i + 1, e))?;
            out.push((i + 1, v));
        }
        out
    };

    let mut corpus = CorpusStore::new();
    let mut queries = Vec::new();
    let mut rejected = Vec::new();
    for (line_no, value) in records {
        let rec: WikiRecord = serde_json::from_value(value).map_err(|e| malformed(path, line_no, e))?;
        let mut by_title: HashMap<&str, String> = HashMap::new();
        let mut candidates = Vec::new();
        for (title, sentences) in &rec.context {
            let body = sentences.join(" ");
            let passage = Passage::new(Some(title), &body, "wiki2hop").map_err(|e| malformed(path, line_no, e))?;
            let (id, _) = corpus.insert(passage);
            by_title.entry(title.as_str()).or_insert_with(|| id.clone());
            if !candidates.contains(&id) {
                candidates.push(id);
            }
        }
        let mut gold_ids: Vec<String> = Vec::new();
        for (title, _) in &rec.supporting_facts {
            let id = by_title.get(title.as_str()).ok_or_else(|| Error::UnresolvedGold {
                query_id: rec.id.clone(),
                passage_id: title.clone(),
            })?;
            if !gold_ids.contains(id) {
                gold_ids.push(id.clone());
            }
        }
        let answers = answer_list(&rec.answer, &rec.answer_aliases);
        if answers.is_empty() {
            return Err(malformed(path, line_no, "empty answer"));
        }
        let parsed = hops_from_id(&rec.id).map(usize::from).unwrap_or(gold_ids.len());
        let Some(hops) = hop_in_range(parsed) else {
            rejected.push(Rejection {
                line: line_no,
                record_id: rec.id,
                reason: format!("hop count {parsed} outside {MIN_HOPS}..={MAX_HOPS}"),
            });
            continue;
        };
        queries.push(Query {
            id: rec.id,
            text: rec.question,
            hops,
            answers,
            gold_ids,
            candidate_ids: Some(candidates),
            distractor_ids: Vec::new(),
        });
    }
    Ok(Dataset {
        corpus,
        queries,
        rejected,
    })
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RagLine {
    Query {
        #[serde(default)]
        id: Option<String>,
        query: String,
        answer: String,
        #[serde(default)]
        evidence_list: Vec<RagEvidence>,
    },
    Document {
        title: String,
        body: String,
    },
}

#[derive(Deserialize)]
struct RagEvidence {
    title: String,
    fact: String,
}

fn ingest_multihoprag(path: &Path, chunking: ChunkConfig) -> Result<Dataset> {
    let mut corpus = CorpusStore::new();
    // title -> chunk ids of every document carrying that title
    let mut chunks_by_title: HashMap<String, Vec<String>> = HashMap::new();
    let mut pending = Vec::new();
    for (line_no, line) in read_lines(path)? {
        match serde_json::from_str::<RagLine>(&line).map_err(|e| malformed(path, line_no, e))? {
            RagLine::Document { title, body } => {
                let chunks = chunk_document(Some(&title), &body, "multihoprag", chunking)
                    .map_err(|e| malformed(path, line_no, e))?;
                let entry = chunks_by_title.entry(collapse_ws(&title)).or_default();
                for c in chunks {
                    let (id, _) = corpus.insert(c);
                    if !entry.contains(&id) {
                        entry.push(id);
                    }
                }
            }
            RagLine::Query {
                id,
                query,
                answer,
                evidence_list,
            } => pending.push((line_no, id, query, answer, evidence_list)),
        }
    }

    let mut queries = Vec::new();
    let mut rejected = Vec::new();
    for (line_no, id, text, answer, evidence) in pending {
        let id = id.unwrap_or_else(|| format!("mhr-{line_no}"));
        let mut gold_ids: Vec<String> = Vec::new();
        for ev in &evidence {
            let chunk_ids = chunks_by_title
                .get(&collapse_ws(&ev.title))
                .ok_or_else(|| Error::UnresolvedGold {
                    query_id: id.clone(),
                    passage_id: ev.title.clone(),
                })?;
            let best = best_overlap_chunk(&corpus, chunk_ids, &ev.fact);
            if !gold_ids.contains(best) {
                gold_ids.push(best.clone());
            }
        }
        let answers = answer_list(&answer, &[]);
        if answers.is_empty() {
            return Err(malformed(path, line_no, "empty answer"));
        }
        let parsed = hops_from_id(&id).map(usize::from).unwrap_or(gold_ids.len());
        let Some(hops) = hop_in_range(parsed) else {
            rejected.push(Rejection {
                line: line_no,
                record_id: id,
                reason: format!("hop count {parsed} outside {MIN_HOPS}..={MAX_HOPS}"),
            });
            continue;
        };
        queries.push(Query {
            id,
            text,
            hops,
            answers,
            gold_ids,
            candidate_ids: None,
            distractor_ids: Vec::new(),
        });
    }
    Ok(Dataset {
        corpus,
        queries,
        rejected,
    })
}

fn best_overlap_chunk<'a>(corpus: &CorpusStore, chunk_ids: &'a [String], fact: &str) -> &'a String {
    let fact_terms: HashSet<String> = tokenize(fact).into_iter().collect();
    let mut best = &chunk_ids[0];
    let mut best_overlap = 0usize;
    for id in chunk_ids {
        let Some(p) = corpus.get(id) else { continue };
        let overlap = tokenize(&p.body)
            .into_iter()
            .collect::<HashSet<_>>()
            .intersection(&fact_terms)
            .count();
        if overlap > best_overlap {
            best = id;
            best_overlap = overlap;
        }
    }
    best
}

/// Splits `doc` into word windows of `chunk_words`, each starting
/// `chunk_words - overlap_words` words after the previous one. Windowing
/// stops after the first window shorter than `chunk_words`.
pub fn chunk_words(doc: &str, chunk_words: usize, overlap_words: usize) -> Result<Vec<String>> {
    if chunk_words == 0 {
        return Err(Error::invalid("chunk_words must be positive"));
    }
    if overlap_words >= chunk_words {
        return Err(Error::invalid(format!(
            "overlap_words ({overlap_words}) must be smaller than chunk_words ({chunk_words})"
        )));
    }
    let words: Vec<&str> = doc.split_whitespace().collect();
    if words.is_empty() {
        return Err(Error::invalid("document is empty"));
    }
    let stride = chunk_words - overlap_words;
    let mut chunks = Vec::new();
    for start in (0..words.len()).step_by(stride) {
        let end = (start + chunk_words).min(words.len());
        chunks.push(words[start..end].join(" "));
        // the first short window is the tail; later ones would be shorter still
        if end - start < chunk_words {
            break;
        }
    }
    Ok(chunks)
}

pub fn chunk_document(title: Option<&str>, doc: &str, source: &str, cfg: ChunkConfig) -> Result<Vec<Passage>> {
    chunk_words(doc, cfg.chunk_words, cfg.overlap_words)?
        .iter()
        .map(|c| Passage::new(title, c, source))
        .collect()
}

/// Seeded shuffle-and-cut into `(train, eval)`; each side keeps input order.
pub fn train_eval_split<T: Clone>(items: &[T], train_fraction: f64, seed: u64) -> Result<(Vec<T>, Vec<T>)> {
    if items.is_empty() {
        return Err(Error::invalid("cannot split an empty list"));
    }
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::invalid(format!("train_fraction {train_fraction} not in (0, 1)")));
    }
    let n_train = (train_fraction * items.len() as f64).round() as usize;
    let mut order: Vec<usize> = (0..items.len()).collect();
    order.shuffle(&mut rng_for(seed, "train-eval-split"));
    let mut in_train = vec![false; items.len()];
    for &i in &order[..n_train] {
        in_train[i] = true;
    }
    let (mut train, mut eval) = (Vec::with_capacity(n_train), Vec::with_capacity(items.len() - n_train));
    for (item, t) in items.iter().zip(in_train) {
        if t {
            train.push(item.clone());
        } else {
            eval.push(item.clone());
        }
    }
    Ok((train, eval))
}

pub fn write_queries(path: &Path, queries: &[Query]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for q in queries {
        serde_json::to_writer(&mut out, q)?;
        out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn write_tmp(lines: &[String]) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        for l in lines {
            writeln!(f, "{l}").unwrap();
        }
        f
    }

    fn musique_line(id: &str, supporting: &[(&str, &str)], other: &[(&str, &str)]) -> String {
        let mut paragraphs = Vec::new();
        for (i, (t, b)) in supporting.iter().chain(other).enumerate() {
            paragraphs.push(serde_json::json!({
                "idx": i, "title": t, "paragraph_text": b, "is_supporting": i < supporting.len()
            }));
        }
        serde_json::json!({
            "id": id, "question": "q?", "answer": "ans", "answer_aliases": ["alias"],
            "paragraphs": paragraphs, "answerable": true
        })
        .to_string()
    }

    #[test]
    fn shared_paragraph_is_stored_once() {
        let shared = ("Shared", "a paragraph used by two questions");
        let f = write_tmp(&[
            musique_line("2hop__1_2", &[shared, ("A", "alpha")], &[("X", "x")]),
            musique_line("2hop__3_4", &[shared, ("B", "beta")], &[("X", "x")]),
        ]);
        let ds = ingest_dataset(f.path(), DatasetFormat::Musique).unwrap();
        assert_eq!(ds.corpus.len(), 4);
        assert_eq!(ds.queries[0].gold_ids[0], ds.queries[1].gold_ids[0]);
        assert_eq!(ds.queries[0].answers, vec!["ans", "alias"]);
        assert_eq!(ds.queries[0].distractor_ids.len(), 1);
    }

    #[test]
    fn hop_prefix_parsing() {
        assert_eq!(hops_from_id("2hop__482757_12019"), Some(2));
        assert_eq!(hops_from_id("3hop1__1_2_3"), Some(3));
        assert_eq!(hops_from_id("4hop3__1"), Some(4));
        assert_eq!(hops_from_id("abc"), None);
        assert_eq!(hops_from_id(""), None);
    }

    #[test]
    fn malformed_line_names_line_number() {
        let f = write_tmp(&[musique_line("2hop__1", &[("A", "a"), ("B", "b")], &[]), "{not json".into()]);
        match ingest_dataset(f.path(), DatasetFormat::Musique) {
            Err(Error::MalformedRecord { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn out_of_range_hops_rejected_not_clamped() {
        let f = write_tmp(&[
            musique_line("5hop__1", &[("A", "a")], &[]),
            musique_line("x", &[("A", "a")], &[]),
            musique_line("2hop__1", &[("A", "a"), ("B", "b")], &[]),
        ]);
        let ds = ingest_dataset(f.path(), DatasetFormat::Musique).unwrap();
        assert_eq!(ds.queries.len(), 1);
        assert_eq!(ds.rejected.len(), 2);
        assert_eq!(ds.rejected[0].line, 1);
    }

    #[test]
    fn musique_gold_count_must_match_hops() {
        let f = write_tmp(&[musique_line("3hop1__1", &[("A", "a"), ("B", "b")], &[])]);
        assert!(matches!(
            ingest_dataset(f.path(), DatasetFormat::Musique),
            Err(Error::MalformedRecord { .. })
        ));
    }

    #[test]
    fn ingestion_is_idempotent() {
        let f = write_tmp(&[
            musique_line("2hop__1", &[("A", "a"), ("B", "b")], &[("C", "c")]),
            musique_line("3hop1__2", &[("A", "a"), ("D", "d"), ("E", "e")], &[("C", "c")]),
        ]);
        let a = ingest_dataset(f.path(), DatasetFormat::Musique).unwrap();
        let b = ingest_dataset(f.path(), DatasetFormat::Musique).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn wiki2hop_candidates_and_gold() {
        let rec = serde_json::json!({
            "_id": "abc123", "type": "comparison", "question": "Who is older?", "answer": "Bob",
            "context": [["Alice", ["Alice was born in 1900.", " She lived."]], ["Bob", ["Bob was born in 1890."]], ["Carol", ["Unrelated."]]],
            "supporting_facts": [["Bob", 0], ["Alice", 0], ["Bob", 0]]
        });
        let f = write_tmp(&[rec.to_string()]);
        let ds = ingest_dataset(f.path(), DatasetFormat::Wiki2hop).unwrap();
        let q = &ds.queries[0];
        assert_eq!(q.hops, 2);
        assert_eq!(q.candidate_ids.as_ref().unwrap().len(), 3);
        assert_eq!(ds.corpus.get(&q.gold_ids[0]).unwrap().title.as_deref(), Some("Bob"));
        assert_eq!(q.distractor_pool().len(), 1);
        assert_eq!(ds.corpus.get(&q.gold_ids[1]).unwrap().body, "Alice was born in 1900. She lived.");
    }

    #[test]
    fn wiki2hop_unresolvable_gold_names_query() {
        let rec = serde_json::json!({
            "_id": "q9", "question": "?", "answer": "x",
            "context": [["A", ["a"]]], "supporting_facts": [["A", 0], ["Missing", 1]]
        });
        let f = write_tmp(&[rec.to_string()]);
        match ingest_dataset(f.path(), DatasetFormat::Wiki2hop) {
            Err(Error::UnresolvedGold { query_id, .. }) => assert_eq!(query_id, "q9"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn multihoprag_chunks_and_resolves_evidence() {
        let body_a: String = (0..250).map(|i| format!("w{i} ")).collect();
        let lines = vec![
            serde_json::json!({"title": "Doc A", "body": body_a}).to_string(),
            serde_json::json!({"title": "Doc B", "body": "the quick brown fox jumps"}).to_string(),
            serde_json::json!({
                "query": "what?", "answer": "Yes", "question_type": "inference_query",
                "evidence_list": [{"title": "Doc A", "fact": "w210 w211 w212"}, {"title": "Doc B", "fact": "brown fox"}]
            })
            .to_string(),
            serde_json::json!({"query": "none?", "answer": "Insufficient information.", "evidence_list": []}).to_string(),
        ];
        let f = write_tmp(&lines);
        let ds = ingest_dataset(f.path(), DatasetFormat::Multihoprag).unwrap();
        assert_eq!(ds.corpus.len(), 3);
        assert_eq!(ds.queries.len(), 1);
        assert_eq!(ds.rejected.len(), 1);
        let gold = ds.corpus.get(&ds.queries[0].gold_ids[0]).unwrap();
        assert!(gold.body.starts_with("w200 "));
    }

    #[test]
    fn chunk_examples() {
        let doc = "w1 w2 w3 w4 w5 w6 w7 w8 w9 w10";
        assert_eq!(chunk_words(doc, 10, 0).unwrap(), vec![doc.to_string()]);
        let lens: Vec<usize> = chunk_words(doc, 4, 0)
            .unwrap()
            .iter()
            .map(|c| c.split(' ').count())
            .collect();
        assert_eq!(lens, vec![4, 4, 2]);
        let starts: Vec<String> = chunk_words(doc, 4, 2)
            .unwrap()
            .iter()
            .map(|c| c.split(' ').next().unwrap().to_string())
            .collect();
        assert_eq!(starts, vec!["w1", "w3", "w5", "w7", "w9"]);
        assert!(matches!(chunk_words(doc, 0, 0), Err(Error::InvalidArgument(_))));
        assert!(chunk_words(doc, 3, 3).is_err());
        assert!(chunk_words("  ", 3, 0).is_err());
    }

    proptest! {
        #[test]
        fn chunking_round_trips(n_words in 1usize..120, chunk in 1usize..20, overlap_seed in 0usize..20) {
            let overlap = overlap_seed % chunk;
            let words: Vec<String> = (0..n_words).map(|i| format!("t{i}")).collect();
            let chunks = chunk_words(&words.join(" "), chunk, overlap).unwrap();
            let mut rebuilt: Vec<String> = Vec::new();
            for (i, c) in chunks.iter().enumerate() {
                let ws: Vec<&str> = c.split(' ').collect();
                if i + 1 < chunks.len() {
                    prop_assert_eq!(ws.len(), chunk);
                }
                let skip = if i == 0 { 0 } else { overlap.min(ws.len()) };
                rebuilt.extend(ws[skip..].iter().map(|s| s.to_string()));
            }
            prop_assert_eq!(rebuilt, words);
        }
    }

    #[test]
    fn split_examples() {
        let items: Vec<u32> = (0..10).collect();
        let (train, eval) = train_eval_split(&items, 0.8, 7).unwrap();
        assert_eq!((train.len(), eval.len()), (8, 2));
        assert!(eval.iter().all(|e| !train.contains(e)));
        assert_eq!(train_eval_split(&items, 0.8, 7).unwrap(), (train, eval));
        let five: Vec<u32> = (0..5).collect();
        let (t, e) = train_eval_split(&five, 0.8, 1).unwrap();
        assert_eq!((t.len(), e.len()), (4, 1));
        assert!(train_eval_split::<u32>(&[], 0.8, 1).is_err());
        assert!(train_eval_split(&five, 1.0, 1).is_err());
    }

    #[test]
    fn dump_round_trip() {
        let mut c = CorpusStore::new();
        c.insert(Passage::new(Some("T"), "body one", "s").unwrap());
        c.insert(Passage::new(None, "body two", "s").unwrap());
        let f = tempfile::NamedTempFile::new().unwrap();
        c.write_dump(f.path()).unwrap();
        assert_eq!(CorpusStore::read_dump(f.path()).unwrap(), c);
    }

    #[test]
    fn passage_identity_ignores_whitespace_layout() {
        let a = Passage::new(Some("T"), "a  b\n c", "x").unwrap();
        let b = Passage::new(Some(" T "), "a b c", "y").unwrap();
        assert_eq!(a.id, b.id);
        assert_ne!(a.id, Passage::new(Some("U"), "a b c", "x").unwrap().id);
        assert!(Passage::new(None, "   ", "x").is_err());
    }
}
