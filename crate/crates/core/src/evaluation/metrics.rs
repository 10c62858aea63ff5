use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

/// Lowercase, drop ASCII punctuation, drop the articles a/an/the, collapse
/// whitespace.
pub fn normalize_answer(text: &str) -> String {
    let lowered = text.to_lowercase();
    let no_punct: String = lowered.chars().filter(|c| !c.is_ascii_punctuation()).collect();
    no_punct
        .split_whitespace()
        .filter(|t| !matches!(*t, "a" | "an" | "the"))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Which gold strings a prediction is compared against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnswerMode {
    /// Best score over the answer and its aliases.
    #[default]
    MaxOverAnswers,
    /// The primary answer only.
    FirstOnly,
}

impl AnswerMode {
    fn answers(self, answers: &[String]) -> &[String] {
        match self {
            AnswerMode::MaxOverAnswers => answers,
            AnswerMode::FirstOnly => &answers[..answers.len().min(1)],
        }
    }
}

pub fn exact_match(prediction: &str, answers: &[String]) -> u8 {
    exact_match_with(prediction, answers, AnswerMode::MaxOverAnswers)
}

pub fn exact_match_with(prediction: &str, answers: &[String], mode: AnswerMode) -> u8 {
    let p = normalize_answer(prediction);
    u8::from(mode.answers(answers).iter().any(|a| normalize_answer(a) == p))
}

fn token_f1(pred: &[&str], gold: &[&str]) -> f64 {
    if pred.is_empty() && gold.is_empty() {
        return 1.0;
    }
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for t in gold {
        *counts.entry(t).or_default() += 1;
    }
    let mut overlap = 0usize;
    for t in pred {
        if let Some(c) = counts.get_mut(t) {
            if *c > 0 {
                *c -= 1;
                overlap += 1;
            }
        }
    }
    if overlap == 0 {
        return 0.0;
    }
    let p = overlap as f64 / pred.len() as f64;
    let r = overlap as f64 / gold.len() as f64;
    2.0 * p * r / (p + r)
}

pub fn f1_score(prediction: &str, answers: &[String]) -> f64 {
    f1_score_with(prediction, answers, AnswerMode::MaxOverAnswers)
}

pub fn f1_score_with(prediction: &str, answers: &[String], mode: AnswerMode) -> f64 {
    let p = normalize_answer(prediction);
    let pt: Vec<&str> = p.split_whitespace().collect();
    mode.answers(answers)
        .iter()
        .map(|a| {
            let g = normalize_answer(a);
            let gt: Vec<&str> = g.split_whitespace().collect();
            token_f1(&pt, &gt)
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrecisionRecall {
    /// `None` when nothing was retrieved.
    pub precision: Option<f64>,
    pub recall: f64,
}

pub fn precision_recall(retrieved_ids: &[String], gold_ids: &[String]) -> PrecisionRecall {
    let retrieved: HashSet<&String> = retrieved_ids.iter().collect();
    let gold: HashSet<&String> = gold_ids.iter().collect();
    let hit = retrieved.intersection(&gold).count() as f64;
    PrecisionRecall {
        precision: (!retrieved.is_empty()).then(|| hit / retrieved.len() as f64),
        recall: if gold.is_empty() { 0.0 } else { hit / gold.len() as f64 },
    }
}
