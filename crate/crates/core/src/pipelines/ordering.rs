use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum OrderingStrategy {
    #[default]
    AsRanked,
    RelevantBeginning,
    RelevantMiddle,
    RelevantEnd,
    /// Reverses a relevance-ranked list.
    MostRelevantLast,
}

impl OrderingStrategy {
    pub const POSITIONAL: [OrderingStrategy; 3] = [
        OrderingStrategy::RelevantBeginning,
        OrderingStrategy::RelevantMiddle,
        OrderingStrategy::RelevantEnd,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            OrderingStrategy::AsRanked => "as_ranked",
            OrderingStrategy::RelevantBeginning => "beginning",
            OrderingStrategy::RelevantMiddle => "middle",
            OrderingStrategy::RelevantEnd => "end",
            OrderingStrategy::MostRelevantLast => "most_relevant_last",
        }
    }

    /// 0-based index of the first relevant slot for the positional
    /// strategies, given `n` slots and `r` relevant passages.
    pub fn block_start(self, n: usize, r: usize) -> Option<usize> {
        match self {
            OrderingStrategy::RelevantBeginning => Some(0),
            OrderingStrategy::RelevantEnd => Some(n - r),
            OrderingStrategy::RelevantMiddle => Some((n - r).div_ceil(2)),
            OrderingStrategy::AsRanked | OrderingStrategy::MostRelevantLast => None,
        }
    }
}

/// Orders `passage_ids` so the relevant ones occupy a contiguous block.
/// Relevant ids keep their relative input order, as do the others.
pub fn assemble_context(
    passage_ids: &[String],
    relevant_ids: &[String],
    strategy: OrderingStrategy,
    total_slots: usize,
) -> Result<Vec<String>> {
    if passage_ids.len() != total_slots {
        return Err(Error::invalid(format!(
            "{} passages for {total_slots} slots",
            passage_ids.len()
        )));
    }
    let unique: HashSet<&String> = passage_ids.iter().collect();
    if unique.len() != passage_ids.len() {
        return Err(Error::invalid("duplicate passage ids in context"));
    }
    let relevant: HashSet<&String> = relevant_ids.iter().collect();
    if let Some(missing) = relevant.iter().find(|r| !unique.contains(*r)) {
        return Err(Error::invalid(format!("relevant id {missing} not among passages")));
    }

    let Some(start) = strategy.block_start(total_slots, relevant.len()) else {
        let mut out = passage_ids.to_vec();
        if strategy == OrderingStrategy::MostRelevantLast {
            out.reverse();
        }
        return Ok(out);
    };
    let (rel, other): (Vec<&String>, Vec<&String>) = passage_ids.iter().partition(|p| relevant.contains(p));
    let mut out = Vec::with_capacity(total_slots);
    out.extend(other[..start].iter().map(|s| (*s).clone()));
    out.extend(rel.iter().map(|s| (*s).clone()));
    out.extend(other[start..].iter().map(|s| (*s).clone()));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ids(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    fn positions(out: &[String], rel: &[String]) -> Vec<usize> {
        out.iter()
            .enumerate()
            .filter(|(_, p)| rel.contains(p))
            .map(|(i, _)| i + 1)
            .collect()
    }

    #[test]
    fn block_positions_five_slots_two_relevant() {
        let ps = ids(&["g1", "d1", "g2", "d2", "d3"]);
        let rel = ids(&["g1", "g2"]);
        let at = |s| positions(&assemble_context(&ps, &rel, s, 5).unwrap(), &rel);
        assert_eq!(at(OrderingStrategy::RelevantBeginning), vec![1, 2]);
        assert_eq!(at(OrderingStrategy::RelevantMiddle), vec![3, 4]);
        assert_eq!(at(OrderingStrategy::RelevantEnd), vec![4, 5]);
        assert_eq!(
            assemble_context(&ps, &rel, OrderingStrategy::RelevantEnd, 5).unwrap(),
            ids(&["d1", "d2", "d3", "g1", "g2"])
        );
    }

    #[test]
    fn identity_and_reverse() {
        let ps = ids(&["a", "b", "c"]);
        assert_eq!(assemble_context(&ps, &[], OrderingStrategy::AsRanked, 3).unwrap(), ps);
        assert_eq!(
            assemble_context(&ps, &[], OrderingStrategy::MostRelevantLast, 3).unwrap(),
            ids(&["c", "b", "a"])
        );
    }

    #[test]
    fn precondition_violations() {
        let ps = ids(&["a", "b"]);
        assert!(assemble_context(&ps, &ids(&["z"]), OrderingStrategy::RelevantEnd, 2).is_err());
        assert!(assemble_context(&ps, &[], OrderingStrategy::RelevantEnd, 3).is_err());
        assert!(assemble_context(&ids(&["a", "a"]), &[], OrderingStrategy::AsRanked, 2).is_err());
    }

    fn strategy() -> impl Strategy<Value = OrderingStrategy> {
        prop_oneof![
            Just(OrderingStrategy::AsRanked),
            Just(OrderingStrategy::RelevantBeginning),
            Just(OrderingStrategy::RelevantMiddle),
            Just(OrderingStrategy::RelevantEnd),
            Just(OrderingStrategy::MostRelevantLast),
        ]
    }

    proptest! {
        #[test]
        fn output_is_permutation(n in 1usize..12, mask in any::<u16>(), s in strategy()) {
            let ps: Vec<String> = (0..n).map(|i| format!("p{i}")).collect();
            let rel: Vec<String> = ps.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, p)| p.clone()).collect();
            let out = assemble_context(&ps, &rel, s, n).unwrap();
            let mut a = out.clone();
            a.sort();
            let mut b = ps.clone();
            b.sort();
            prop_assert_eq!(a, b);
            if let Some(start) = s.block_start(n, rel.len()) {
                let expected: Vec<usize> = (start + 1..=start + rel.len()).collect();
                prop_assert_eq!(positions(&out, &rel), expected);
            }
        }
    }
}
