//! Gold-informed stand-ins for the retriever and the reranker.

use std::collections::HashSet;

use rand::seq::{IndexedRandom, SliceRandom};

use crate::corpus::Query;
use crate::error::{Error, Result};
use crate::seed::rng_for;

/// Simulated retrieval that always surfaces the gold passages.
///
/// With `k >= hops` the context is every gold id plus `k - hops` distractors
/// sampled from `pool`; with `k < hops` it is the first `k` gold ids in
/// annotation order. The result is shuffled. Both the sample and the shuffle
/// depend only on `(seed, query.id)`.
pub fn simulate_ideal_retriever(query: &Query, k: usize, pool: &[&str], seed: u64) -> Result<Vec<String>> {
    if k == 0 {
        return Err(Error::invalid("ideal retriever needs k >= 1"));
    }
    if let Some(g) = pool.iter().find(|p| query.is_gold(p)) {
        return Err(Error::invalid(format!(
            "query {}: distractor pool contains gold passage {g}",
            query.id
        )));
    }
    let hops = query.gold_ids.len();
    let mut rng = rng_for(seed, &format!("ideal-retriever\u{1f}{}", query.id));
    let mut out: Vec<String> = query.gold_ids.iter().take(k).cloned().collect();
    if k > hops {
        let need = k - hops;
        let distinct: Vec<&str> = {
            let mut seen = HashSet::new();
            pool.iter().copied().filter(|p| seen.insert(*p)).collect()
        };
        if distinct.len() < need {
            return Err(Error::PoolExhausted {
                query_id: query.id.clone(),
                needed: need,
                available: distinct.len(),
            });
        }
        out.extend(distinct.choose_multiple(&mut rng, need).map(|s| s.to_string()));
    }
    out.shuffle(&mut rng);
    Ok(out)
}

/// Stable partition: gold candidates first, then the rest.
pub fn ideal_rerank(candidates: &[String], gold_ids: &[String]) -> Vec<String> {
    let gold: HashSet<&String> = gold_ids.iter().collect();
    let (mut g, d): (Vec<String>, Vec<String>) = candidates.iter().cloned().partition(|c| gold.contains(c));
    g.extend(d);
    g
}
