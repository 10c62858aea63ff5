//! Context-composition and context-position studies.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{CorpusStore, Passage, Query};
use crate::error::{Error, Result};
use crate::evaluation::{exact_match_with, f1_score_with, AnswerMode};
use crate::gateway::Generator;
use crate::pipelines::{assemble_context, OrderingStrategy};
use crate::seed::rng_for;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyCell {
    pub condition: String,
    /// `None` for cells pooled over hop classes.
    pub hop: Option<u8>,
    pub n: usize,
    pub em: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyResult {
    pub study: String,
    pub cells: Vec<StudyCell>,
}

impl StudyResult {
    pub fn cell(&self, condition: &str, hop: Option<u8>) -> Option<&StudyCell> {
        self.cells.iter().find(|c| c.condition == condition && c.hop == hop)
    }

    /// Aligned text grid: one line per cell.
    pub fn to_table(&self) -> String {
        let mut out = format!("{:<14} {:>4} {:>6} {:>8} {:>8}\n", "condition", "hop", "n", "EM", "F1");
        for c in &self.cells {
            let _ = writeln!(
                out,
                "{:<14} {:>4} {:>6} {:>8.4} {:>8.4}",
                c.condition,
                hop_label(c.hop),
                c.n,
                c.em,
                c.f1
            );
        }
        out
    }

    /// Long format for plotting: `study, condition, hop, n, metric, value`.
    pub fn to_long_tsv(&self) -> String {
        let mut out = String::from("study\tcondition\thop\tn\tmetric\tvalue\n");
        for c in &self.cells {
            for (m, v) in [("em", c.em), ("f1", c.f1)] {
                let _ = writeln!(out, "{}\t{}\t{}\t{}\t{m}\t{v}", self.study, c.condition, hop_label(c.hop), c.n);
            }
        }
        out
    }
}

fn hop_label(h: Option<u8>) -> String {
    h.map_or_else(|| "all".into(), |h| h.to_string())
}

/// Condition label: `"{g}g"` or `"{g}g+{d}d"`.
pub fn condition_label(gold: usize, distractors: usize) -> String {
    if distractors == 0 {
        format!("{gold}g")
    } else {
        format!("{gold}g+{distractors}d")
    }
}

fn score(
    query: &Query,
    ids: &[String],
    corpus: &CorpusStore,
    generator: &dyn Generator,
    mode: AnswerMode,
) -> Result<(f64, f64)> {
    let passages: Vec<&Passage> = ids.iter().map(|id| corpus.require(id)).collect::<Result<_>>()?;
    let answer = generator.generate(query, &passages).map_err(|e| e.at_stage("generate"))?;
    Ok((
        f64::from(exact_match_with(&answer, &query.answers, mode)),
        f1_score_with(&answer, &query.answers, mode),
    ))
}

fn sampled_distractors(query: &Query, n: usize, seed: u64, purpose: &str) -> Result<Vec<String>> {
    let pool = query.distractor_pool();
    if pool.len() < n {
        return Err(Error::PoolExhausted {
            query_id: query.id.clone(),
            needed: n,
            available: pool.len(),
        });
    }
    let mut pool: Vec<String> = pool.into_iter().map(str::to_string).collect();
    let mut rng = rng_for(seed, &format!("{purpose}\u{1f}distractors\u{1f}{}", query.id));
    pool.shuffle(&mut rng);
    pool.truncate(n);
    Ok(pool)
}

/// The per-hop conditions: 0..=hops gold passages with no distractors, then
/// all gold plus each distractor count.
pub fn distractor_conditions(hops: usize, distractor_counts: &[usize]) -> Vec<(usize, usize)> {
    (0..=hops)
        .map(|g| (g, 0))
        .chain(distractor_counts.iter().filter(|&&d| d > 0).map(|&d| (hops, d)))
        .collect()
}

/// Contexts for every distractor-study condition of one query.
///
/// Partial gold sets are nested prefixes of one seeded permutation, kept in
/// annotation order; distractor sets are nested prefixes of one seeded
/// sample and follow the gold passages.
pub fn distractor_contexts(query: &Query, distractor_counts: &[usize], seed: u64) -> Result<Vec<(String, Vec<String>)>> {
    let hops = query.gold_ids.len();
    let max_d = distractor_counts.iter().copied().max().unwrap_or(0);
    let distractors = sampled_distractors(query, max_d, seed, "distractor-study")?;
    let mut order: Vec<usize> = (0..hops).collect();
    order.shuffle(&mut rng_for(seed, &format!("distractor-study\u{1f}gold\u{1f}{}", query.id)));
    Ok(distractor_conditions(hops, distractor_counts)
        .into_iter()
        .map(|(g, d)| {
            let mut keep = order[..g].to_vec();
            keep.sort_unstable();
            let mut ids: Vec<String> = keep.into_iter().map(|i| query.gold_ids[i].clone()).collect();
            ids.extend(distractors[..d].iter().cloned());
            (condition_label(g, d), ids)
        })
        .collect())
}

struct Acc {
    n: usize,
    em: f64,
    f1: f64,
}

fn cells_from(acc: BTreeMap<(Option<u8>, usize, String), Acc>) -> Vec<StudyCell> {
    acc.into_iter()
        .map(|((hop, _, condition), a)| StudyCell {
            condition,
            hop,
            n: a.n,
            em: a.em / a.n as f64,
            f1: a.f1 / a.n as f64,
        })
        .collect()
}

fn fold(
    acc: &mut BTreeMap<(Option<u8>, usize, String), Acc>,
    key: (Option<u8>, usize, String),
    (em, f1): (f64, f64),
) {
    let a = acc.entry(key).or_insert(Acc { n: 0, em: 0.0, f1: 0.0 });
    a.n += 1;
    a.em += em;
    a.f1 += f1;
}

/// Generation quality as gold passages are added and then distractors.
/// Cells are per hop class; every condition is evaluated on every query of
/// that class.
pub fn distractor_study(
    queries: &[Query],
    corpus: &CorpusStore,
    generator: &dyn Generator,
    distractor_counts: &[usize],
    seed: u64,
    mode: AnswerMode,
) -> Result<StudyResult> {
    if queries.is_empty() {
        return Err(Error::invalid("distractor study needs at least one query"));
    }
    type Scored = Vec<(usize, String, (f64, f64))>;
    let per_query: Vec<Result<Scored>> = queries
        .par_iter()
        .map(|q| {
            distractor_contexts(q, distractor_counts, seed)?
                .into_iter()
                .enumerate()
                .map(|(i, (label, ids))| Ok((i, label, score(q, &ids, corpus, generator, mode)?)))
                .collect()
        })
        .collect();
    let mut acc = BTreeMap::new();
    for (q, scores) in queries.iter().zip(per_query) {
        for (i, label, s) in scores? {
            fold(&mut acc, (Some(q.hops), i, label), s);
        }
    }
    Ok(StudyResult {
        study: "distractor".into(),
        cells: cells_from(acc),
    })
}

/// The shared context multiset of the position study: gold plus seeded
/// distractors filling `total_slots`.
pub fn position_context(query: &Query, total_slots: usize, seed: u64) -> Result<Vec<String>> {
    let hops = query.gold_ids.len();
    if total_slots < hops + 1 {
        return Err(Error::invalid(format!(
            "query {}: {total_slots} slots cannot hold {hops} gold passages and a distractor",
            query.id
        )));
    }
    let mut ids = query.gold_ids.clone();
    ids.extend(sampled_distractors(query, total_slots - hops, seed, "position-study")?);
    Ok(ids)
}

/// Generation quality with the gold block at the beginning, middle and end
/// of the same context.
pub fn position_study(
    queries: &[Query],
    corpus: &CorpusStore,
    generator: &dyn Generator,
    total_slots: usize,
    seed: u64,
    mode: AnswerMode,
) -> Result<StudyResult> {
    if queries.is_empty() {
        return Err(Error::invalid("position study needs at least one query"));
    }
    let per_query: Vec<Result<Vec<(f64, f64)>>> = queries
        .par_iter()
        .map(|q| {
            let ids = position_context(q, total_slots, seed)?;
            OrderingStrategy::POSITIONAL
                .iter()
                .map(|&s| {
                    let ordered = assemble_context(&ids, &q.gold_ids, s, total_slots)?;
                    score(q, &ordered, corpus, generator, mode)
                })
                .collect()
        })
        .collect();
    let mut acc = BTreeMap::new();
    for (q, scores) in queries.iter().zip(per_query) {
        for (i, s) in scores?.into_iter().enumerate() {
            let label = OrderingStrategy::POSITIONAL[i].tag().to_string();
            fold(&mut acc, (None, i, label.clone()), s);
            fold(&mut acc, (Some(q.hops), i, label), s);
        }
    }
    Ok(StudyResult {
        study: "position".into(),
        cells: cells_from(acc),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::{GoldEchoGenerator, PositionSensitiveGenerator};
    use crate::synthetic::{musique_dataset, SyntheticSpec};

    #[test]
    fn conditions_for_two_hops() {
        let labels: Vec<String> = distractor_conditions(2, &[1, 2])
            .into_iter()
            .map(|(g, d)| condition_label(g, d))
            .collect();
        assert_eq!(labels, vec!["0g", "1g", "2g", "2g+1d", "2g+2d"]);
    }

    #[test]
    fn gold_echo_isolates_composition() {
        let ds = musique_dataset(&SyntheticSpec::new(4, 3, 2, 11)).unwrap();
        let r = distractor_study(&ds.queries, &ds.corpus, &GoldEchoGenerator, &[1, 2], 5, AnswerMode::default())
            .unwrap();
        for c in &r.cells {
            let hop = c.hop.unwrap() as usize;
            let full = c.condition.starts_with(&format!("{hop}g"));
            assert_eq!(c.em, if full { 1.0 } else { 0.0 }, "{c:?}");
        }
        assert_eq!(r.cells.iter().filter(|c| c.hop == Some(2)).count(), 5);
        assert_eq!(r.cell("2g", Some(2)).unwrap().n, 4);
        let again = distractor_study(&ds.queries, &ds.corpus, &GoldEchoGenerator, &[1, 2], 5, AnswerMode::default())
            .unwrap();
        assert_eq!(r, again);
    }

    #[test]
    fn nested_conditions() {
        let ds = musique_dataset(&SyntheticSpec::new(0, 0, 1, 2)).unwrap();
        let ctx = distractor_contexts(&ds.queries[0], &[1, 3], 0).unwrap();
        for w in ctx.windows(2) {
            assert!(w[1].1.starts_with(&w[0].1) || w[0].1.iter().all(|x| w[1].1.contains(x)));
        }
        assert_eq!(ctx.last().unwrap().1.len(), 7);
    }

    #[test]
    fn position_sensitive_mock() {
        let ds = musique_dataset(&SyntheticSpec::new(3, 2, 2, 1)).unwrap();
        let r = position_study(&ds.queries, &ds.corpus, &PositionSensitiveGenerator, 5, 1, AnswerMode::default())
            .unwrap();
        assert_eq!(r.cell("end", None).unwrap().em, 1.0);
        assert_eq!(r.cell("beginning", None).unwrap().em, 0.0);
        assert_eq!(r.cell("middle", None).unwrap().n, 7);
        assert!(position_study(&ds.queries, &ds.corpus, &GoldEchoGenerator, 4, 1, AnswerMode::default()).is_err());
        assert!(r.to_long_tsv().lines().count() == 1 + 2 * r.cells.len());
    }
}
