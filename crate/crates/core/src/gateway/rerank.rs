//! Listwise LLM reranking: prompt construction and id-list parsing.
//!
//! Candidates are shown to the model with display ids `1..=n` in candidate
//! order. Replies are scanned for the first bracketed integer list, e.g.
//! `"[3, 1]"`, which is then repaired against the candidate set.

use std::collections::HashSet;
use std::fmt::Write as _;

use super::chat::ChatClient;
use crate::corpus::Query;
use crate::error::{Error, Result};

pub const RERANK_INSTRUCTION: &str = "Given the following query and passages, rank the passages (by their ID numbers) that are most relevant to answering the query. Return the {predicted-k} most relevant passage IDs in a Python list.";

pub const CONTROL_INSTRUCTION: &str = "Given the following query and passages, select the passages (by their ID numbers) that are needed to answer the query. Decide yourself how many passages are needed. Return the selected passage IDs in a Python list, most relevant first.";

fn render(instruction: &str, query_text: &str, candidates: &[&str]) -> String {
    let mut out = String::new();
    let _ = write!(out, "{instruction}\n\nQuery: {query_text}\n\nPassages:\n");
    for (i, text) in candidates.iter().enumerate() {
        let _ = writeln!(out, "ID {}: {}", i + 1, text);
    }
    out
}

fn check_candidates(candidates: &[&str]) -> Result<()> {
    if candidates.is_empty() {
        return Err(Error::invalid("rerank prompt needs at least one candidate"));
    }
    Ok(())
}

pub fn build_rerank_prompt(query_text: &str, k_pred: usize, candidates: &[&str]) -> Result<String> {
    check_candidates(candidates)?;
    if k_pred == 0 || k_pred > candidates.len() {
        return Err(Error::invalid(format!(
            "k_pred {k_pred} not in 1..={} candidates",
            candidates.len()
        )));
    }
    let instruction = RERANK_INSTRUCTION.replace("{predicted-k}", &k_pred.to_string());
    Ok(render(&instruction, query_text, candidates))
}

/// Variant where the model chooses the number of passages itself.
pub fn build_control_prompt(query_text: &str, candidates: &[&str]) -> Result<String> {
    check_candidates(candidates)?;
    Ok(render(CONTROL_INSTRUCTION, query_text, candidates))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RerankSelection {
    /// Display ids (1-based), most relevant first.
    pub ids: Vec<usize>,
    pub raw: String,
}

fn parse_id(token: &str) -> Option<i64> {
    let t = token.trim().trim_matches(|c| c == '"' || c == '\'').trim();
    t.parse().ok()
}

/// The first `[...]` whose contents are all integers (quoted integers are
/// accepted). `[]` counts as a list.
pub fn first_id_list(raw: &str) -> Option<Vec<i64>> {
    let mut from = 0;
    while let Some(open) = raw[from..].find('[').map(|i| from + i) {
        let close = raw[open..].find(']').map(|i| open + i)?;
        let inner = raw[open + 1..close].trim();
        if inner.is_empty() {
            return Some(Vec::new());
        }
        let parsed: Option<Vec<i64>> = inner.split(',').map(parse_id).collect();
        if let Some(ids) = parsed {
            return Some(ids);
        }
        from = open + 1;
    }
    None
}

fn repair(ids: Vec<i64>, candidate_count: usize) -> Vec<usize> {
    let mut seen = HashSet::new();
    ids.into_iter()
        .filter(|&i| i >= 1 && i as u64 <= candidate_count as u64)
        .map(|i| i as usize)
        .filter(|i| seen.insert(*i))
        .collect()
}

/// Exactly `k` distinct in-range ids: out-of-range and repeated ids are
/// dropped, then the lowest unchosen display ids pad the list.
pub fn parse_rerank_response(raw: &str, candidate_count: usize, k: usize) -> Result<RerankSelection> {
    if k > candidate_count {
        return Err(Error::invalid(format!("k {k} exceeds candidate count {candidate_count}")));
    }
    let ids = first_id_list(raw).ok_or_else(|| Error::RerankParse { raw: raw.to_string() })?;
    let mut ids = repair(ids, candidate_count);
    ids.truncate(k);
    let mut next = 1;
    while ids.len() < k {
        if !ids.contains(&next) {
            ids.push(next);
        }
        next += 1;
    }
    Ok(RerankSelection {
        ids,
        raw: raw.to_string(),
    })
}

/// Control-pipeline parse: repaired against the candidate set, no padding.
pub fn parse_free_selection(raw: &str, candidate_count: usize) -> Result<RerankSelection> {
    let ids = first_id_list(raw).ok_or_else(|| Error::RerankParse { raw: raw.to_string() })?;
    Ok(RerankSelection {
        ids: repair(ids, candidate_count),
        raw: raw.to_string(),
    })
}

/// Produces the raw reply to a rerank prompt. Mock implementations may look
/// at the query and the passage ids behind the display ids; remote ones only
/// see the prompt.
pub trait RerankModel: Send + Sync {
    fn respond(&self, query: &Query, candidate_ids: &[String], prompt: &str) -> Result<String>;
}

impl RerankModel for ChatClient {
    fn respond(&self, _query: &Query, _candidate_ids: &[String], prompt: &str) -> Result<String> {
        self.complete(prompt)
    }
}

/// Replies with every display id in candidate order.
#[derive(Debug, Clone, Default)]
pub struct EchoRanker;

impl RerankModel for EchoRanker {
    fn respond(&self, _query: &Query, candidate_ids: &[String], _prompt: &str) -> Result<String> {
        Ok(format_id_list((1..=candidate_ids.len()).collect::<Vec<_>>().as_slice()))
    }
}

/// Replies with the display ids of gold candidates only, in candidate order.
#[derive(Debug, Clone, Default)]
pub struct GoldAwareRanker;

impl RerankModel for GoldAwareRanker {
    fn respond(&self, query: &Query, candidate_ids: &[String], _prompt: &str) -> Result<String> {
        let ids: Vec<usize> = candidate_ids
            .iter()
            .enumerate()
            .filter(|(_, id)| query.is_gold(id))
            .map(|(i, _)| i + 1)
            .collect();
        Ok(format_id_list(&ids))
    }
}

/// Always replies with the same text.
#[derive(Debug, Clone)]
pub struct FixedReplyRanker(pub String);

impl RerankModel for FixedReplyRanker {
    fn respond(&self, _query: &Query, _candidate_ids: &[String], _prompt: &str) -> Result<String> {
        Ok(self.0.clone())
    }
}

/// Replies with unparseable prose for the listed query ids and defers to
/// `inner` otherwise.
pub struct FaultInjectingRanker {
    inner: Box<dyn RerankModel>,
    failing: HashSet<String>,
}

impl FaultInjectingRanker {
    pub fn new(inner: Box<dyn RerankModel>, failing: impl IntoIterator<Item = String>) -> Self {
        FaultInjectingRanker {
            inner,
            failing: failing.into_iter().collect(),
        }
    }

    pub fn planted(&self) -> usize {
        self.failing.len()
    }
}

impl RerankModel for FaultInjectingRanker {
    fn respond(&self, query: &Query, candidate_ids: &[String], prompt: &str) -> Result<String> {
        if self.failing.contains(&query.id) {
            return Ok("The most relevant passages are the ones about the subject of the question.".into());
        }
        self.inner.respond(query, candidate_ids, prompt)
    }
}

pub fn format_id_list(ids: &[usize]) -> String {
    let parts: Vec<String> = ids.iter().map(usize::to_string).collect();
    format!("[{}]", parts.join(", "))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn prompt_contains_instruction() {
        let c = ["a", "b", "c", "d", "e"];
        let p = build_rerank_prompt("who?", 2, &c).unwrap();
        assert!(p.contains("Return the 2 most relevant passage IDs"));
        assert!(p.starts_with("Given the following query and passages, rank the passages (by their ID numbers) that are most relevant to answering the query. Return the 2 most relevant passage IDs in a Python list.\n"));
        assert!(p.contains("Query: who?"));
        assert!(p.contains("ID 5: e\n"));
        assert!(matches!(build_rerank_prompt("q", 6, &c), Err(Error::InvalidArgument(_))));
        assert!(build_rerank_prompt("q", 1, &[]).is_err());
    }

    #[test]
    fn permuted_candidates_permute_listing() {
        let p = build_rerank_prompt("q", 1, &["x", "y"]).unwrap();
        let r = build_rerank_prompt("q", 1, &["y", "x"]).unwrap();
        assert!(p.contains("ID 1: x\nID 2: y\n"));
        assert!(r.contains("ID 1: y\nID 2: x\n"));
    }

    #[test]
    fn single_candidate() {
        let p = build_rerank_prompt("q", 1, &["only"]).unwrap();
        assert!(p.ends_with("Passages:\nID 1: only\n"));
    }

    #[test]
    fn parse_examples() {
        assert_eq!(parse_rerank_response("[3, 1]", 5, 2).unwrap().ids, vec![3, 1]);
        assert_eq!(
            parse_rerank_response("Sure! The best are [2, 2, 9] ...", 5, 2).unwrap().ids,
            vec![2, 1]
        );
        assert!(matches!(parse_rerank_response("no list here", 5, 2), Err(Error::RerankParse { raw }) if raw == "no list here"));
        assert!(parse_rerank_response("[1]", 2, 3).is_err());
    }

    #[test]
    fn parse_skips_non_integer_brackets() {
        assert_eq!(first_id_list("[see below] ids: [4,2]"), Some(vec![4, 2]));
        assert_eq!(first_id_list("[[1, 2]]"), Some(vec![1, 2]));
        assert_eq!(first_id_list("['3', \"1\"]"), Some(vec![3, 1]));
        assert_eq!(first_id_list("[]"), Some(vec![]));
        assert_eq!(first_id_list("[1, 2"), None);
        assert_eq!(parse_rerank_response("[0, -1, 6]", 5, 2).unwrap().ids, vec![1, 2]);
    }

    #[test]
    fn free_selection_does_not_pad() {
        assert_eq!(parse_free_selection("[1]", 5).unwrap().ids, vec![1]);
        assert_eq!(parse_free_selection("[1,2,3,4,5]", 5).unwrap().ids, vec![1, 2, 3, 4, 5]);
        assert_eq!(parse_free_selection("[7, 2, 2]", 5).unwrap().ids, vec![2]);
        assert!(parse_free_selection("passages two and three", 5).is_err());
    }

    proptest! {
        #[test]
        fn selection_always_valid(raw in "\\PC{0,40}", n in 1usize..12, k_seed in 0usize..12) {
            let k = k_seed % n + 1;
            match parse_rerank_response(&raw, n, k) {
                Ok(sel) => {
                    prop_assert_eq!(sel.ids.len(), k);
                    let uniq: HashSet<_> = sel.ids.iter().collect();
                    prop_assert_eq!(uniq.len(), k);
                    prop_assert!(sel.ids.iter().all(|&i| (1..=n).contains(&i)));
                }
                Err(e) => prop_assert!(matches!(e, Error::RerankParse { .. }), "unexpected error {:?}", e),
            }
        }

        #[test]
        fn listed_ids_always_repaired(ids in proptest::collection::vec(-3i64..15, 0..10), n in 1usize..10, k_seed in 0usize..10) {
            let k = k_seed % n + 1;
            let raw = format!("Answer: [{}]", ids.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(", "));
            let sel = parse_rerank_response(&raw, n, k).unwrap();
            prop_assert_eq!(sel.ids.len(), k);
            let uniq: HashSet<_> = sel.ids.iter().collect();
            prop_assert_eq!(uniq.len(), k);
        }

        #[test]
        fn prompt_injective_in_order(perm_seed in 0u64..1000, n in 2usize..7) {
            use rand::seq::SliceRandom;
            let texts: Vec<String> = (0..n).map(|i| format!("passage text {i}")).collect();
            let mut shuffled = texts.clone();
            shuffled.shuffle(&mut crate::seed::rng_for(perm_seed, "perm"));
            let a: Vec<&str> = texts.iter().map(String::as_str).collect();
            let b: Vec<&str> = shuffled.iter().map(String::as_str).collect();
            let same = a == b;
            prop_assert_eq!(build_rerank_prompt("q", 1, &a).unwrap() == build_rerank_prompt("q", 1, &b).unwrap(), same);
        }
    }
}
