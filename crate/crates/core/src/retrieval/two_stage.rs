use std::collections::HashMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{check_k, rank_top_k, RetrievedPassage, Retriever};
use crate::corpus::{CorpusStore, Query};
use crate::error::{Error, Result};

/// One passage sent to a pair scorer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreItem {
    pub id: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredItem {
    pub id: String,
    pub score: f64,
}

/// Cross-encoder style relevance scorer for (query, passage) pairs.
pub trait PairScorer: Send + Sync {
    fn score(&self, query_text: &str, items: &[ScoreItem]) -> Result<Vec<ScoredItem>>;
}

/// Runs `first_stage` for `first_stage_k` candidates, rescores them with
/// `scorer` and keeps the top `k`.
pub fn two_stage_search(
    first_stage: &dyn Retriever,
    scorer: &dyn PairScorer,
    corpus: &CorpusStore,
    query: &Query,
    first_stage_k: usize,
    k: usize,
) -> Result<Vec<RetrievedPassage>> {
    check_k(k)?;
    if first_stage_k < k {
        return Err(Error::invalid(format!("first_stage_k ({first_stage_k}) < k ({k})")));
    }
    let candidates = first_stage.retrieve(query, first_stage_k)?;
    if candidates.is_empty() {
        return Ok(candidates);
    }
    let items = candidates
        .iter()
        .map(|c| {
            Ok(ScoreItem {
                id: c.passage_id.clone(),
                text: corpus.require(&c.passage_id)?.display_text(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let scored = scorer.score(&query.text, &items)?;
    let by_id: HashMap<&str, f64> = scored.iter().map(|s| (s.id.as_str(), s.score)).collect();
    let missing: Vec<&str> = items
        .iter()
        .map(|i| i.id.as_str())
        .filter(|id| !by_id.contains_key(id))
        .collect();
    if !missing.is_empty() {
        return Err(Error::Endpoint {
            role: "scorer".into(),
            attempts: 1,
            message: format!(
                "response scored {} of {} candidates; missing {:?}",
                items.len() - missing.len(),
                items.len(),
                missing
            ),
        });
    }
    let rescored = items.into_iter().map(|i| {
        let s = by_id[i.id.as_str()];
        (i.id, s)
    });
    Ok(rank_top_k(rescored.collect(), k))
}

pub struct TwoStageRetriever {
    name: String,
    first_stage: Box<dyn Retriever>,
    scorer: Box<dyn PairScorer>,
    corpus: Arc<CorpusStore>,
    candidate_k: usize,
}

impl TwoStageRetriever {
    /// `candidate_k` is the depth of the first stage (50 in the usual
    /// ColBERT-then-cross-encoder setup).
    pub fn new(
        name: impl Into<String>,
        first_stage: Box<dyn Retriever>,
        scorer: Box<dyn PairScorer>,
        corpus: Arc<CorpusStore>,
        candidate_k: usize,
    ) -> Self {
        TwoStageRetriever {
            name: name.into(),
            first_stage,
            scorer,
            corpus,
            candidate_k,
        }
    }
}

impl Retriever for TwoStageRetriever {
    fn name(&self) -> &str {
        &self.name
    }

    fn retrieve(&self, query: &Query, k: usize) -> Result<Vec<RetrievedPassage>> {
        two_stage_search(
            self.first_stage.as_ref(),
            self.scorer.as_ref(),
            &self.corpus,
            query,
            self.candidate_k.max(k),
            k,
        )
    }
}

/// Offline pair scorer: the fraction of distinct query terms that occur in
/// the passage.
#[derive(Debug, Clone, Copy, Default)]
pub struct TermOverlapScorer;

impl PairScorer for TermOverlapScorer {
    fn score(&self, query_text: &str, items: &[ScoreItem]) -> Result<Vec<ScoredItem>> {
        let q: std::collections::HashSet<String> = super::tokenize(query_text).into_iter().collect();
        Ok(items
            .iter()
            .map(|it| {
                let hits = super::tokenize(&it.text)
                    .into_iter()
                    .collect::<std::collections::HashSet<_>>()
                    .intersection(&q)
                    .count();
                ScoredItem {
                    id: it.id.clone(),
                    score: if q.is_empty() { 0.0 } else { hits as f64 / q.len() as f64 },
                }
            })
            .collect())
    }
}
