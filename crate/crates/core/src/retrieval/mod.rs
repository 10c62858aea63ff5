//! Sparse, dense and two-stage passage retrieval.
//!
//! Every result list produced here is ranked `1..=k` with non-increasing
//! scores, and equal scores are ordered by ascending passage id.

mod bm25;
mod dense;
mod two_stage;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

pub use bm25::{bm25_score, build_bm25_index, idf, search_bm25, Bm25Params, Bm25Retriever, InvertedIndex, Posting};
pub use dense::{
    cosine, search_dense, CannedQueryVectors, DenseRetriever, EmbeddingMatrix, QueryEncoder,
};
pub use two_stage::{two_stage_search, PairScorer, ScoreItem, ScoredItem, TermOverlapScorer, TwoStageRetriever};

use crate::corpus::Query;
use crate::error::{Error, Result};

/// Lowercases and splits on every run of non-alphanumeric characters.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievedPassage {
    pub passage_id: String,
    pub score: f64,
    /// 1-based.
    pub rank: usize,
}

/// Anything that turns a query into a ranked passage list.
pub trait Retriever: Send + Sync {
    /// Label used in reports ("BM25", "Dense", ...).
    fn name(&self) -> &str;

    fn retrieve(&self, query: &Query, k: usize) -> Result<Vec<RetrievedPassage>>;
}

/// Sorts by score (descending) then id (ascending), keeps the top `k` and
/// assigns ranks.
pub fn rank_top_k(mut scored: Vec<(String, f64)>, k: usize) -> Vec<RetrievedPassage> {
    let cmp = |a: &(String, f64), b: &(String, f64)| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0));
    if scored.len() > k && k > 0 {
        scored.select_nth_unstable_by(k - 1, cmp);
        scored.truncate(k);
    }
    scored.sort_by(cmp);
    scored.truncate(k);
    let out: Vec<RetrievedPassage> = scored
        .into_iter()
        .enumerate()
        .map(|(i, (passage_id, score))| RetrievedPassage {
            passage_id,
            score,
            rank: i + 1,
        })
        .collect();
    debug_assert!(is_well_ranked(&out));
    out
}

/// Checks the result-list ordering invariant.
pub fn is_well_ranked(list: &[RetrievedPassage]) -> bool {
    list.iter().enumerate().all(|(i, p)| p.rank == i + 1)
        && list.windows(2).all(|w| {
            w[0].score > w[1].score || (w[0].score == w[1].score && w[0].passage_id < w[1].passage_id)
        })
}

fn check_k(k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    Ok(())
}

/// Returns a query's own candidate list in dataset order (rerank-only
/// datasets such as 2WikiMultihopQA).
#[derive(Debug, Clone, Default)]
pub struct CandidateListRetriever;

impl Retriever for CandidateListRetriever {
    fn name(&self) -> &str {
        "Candidates"
    }

    fn retrieve(&self, query: &Query, k: usize) -> Result<Vec<RetrievedPassage>> {
        check_k(k)?;
        let candidates = query
            .candidate_ids
            .as_ref()
            .ok_or_else(|| Error::invalid(format!("query {} has no candidate list", query.id)))?;
        Ok(listed_order(candidates, k))
    }
}

/// Replays precomputed rankings keyed by query id.
#[derive(Debug, Clone, Default)]
pub struct FixedRankingRetriever {
    name: String,
    rankings: HashMap<String, Vec<String>>,
}

impl FixedRankingRetriever {
    pub fn new(name: impl Into<String>, rankings: HashMap<String, Vec<String>>) -> Self {
        FixedRankingRetriever {
            name: name.into(),
            rankings,
        }
    }
}

impl Retriever for FixedRankingRetriever {
    fn name(&self) -> &str {
        &self.name
    }

    fn retrieve(&self, query: &Query, k: usize) -> Result<Vec<RetrievedPassage>> {
        check_k(k)?;
        let ranking = self
            .rankings
            .get(&query.id)
            .ok_or_else(|| Error::UnknownQuery(query.id.clone()))?;
        Ok(listed_order(ranking, k))
    }
}

// Scores are `n - i`, so the listed order is kept and the ranking invariant
// holds without consulting ids.
fn listed_order(ids: &[String], k: usize) -> Vec<RetrievedPassage> {
    let n = ids.len();
    ids.iter()
        .take(k)
        .enumerate()
        .map(|(i, id)| RetrievedPassage {
            passage_id: id.clone(),
            score: (n - i) as f64,
            rank: i + 1,
        })
        .collect()
}
