//! Paired t-test between two pipelines, joined by query id.

use std::sync::Arc;

use ragkit::evaluation::{compare_records, paired_t_test, AnswerMode, Metric};
use ragkit::gateway::{GoldEchoGenerator, OracleClassifier};
use ragkit::pipelines::{run_baseline, run_ideal_reranker};
use ragkit::retrieval::{build_bm25_index, Bm25Params, Bm25Retriever};
use ragkit::synthetic::{musique_dataset, SyntheticSpec};

fn main() -> ragkit::Result<()> {
    let r = paired_t_test(&[0.9, 0.8, 0.7, 0.75], &[0.6, 0.65, 0.7, 0.5])?;
    println!("hand-made samples: t={:.4} df={} p={:.4}", r.t, r.df, r.p);

    let ds = musique_dataset(&SyntheticSpec::new(25, 25, 25, 8).with_distractors(12))?;
    let retriever = Bm25Retriever::new(Arc::new(build_bm25_index(&ds.corpus)?), Bm25Params::default());
    let classifier = OracleClassifier::default();
    let mut base = Vec::new();
    let mut ideal = Vec::new();
    for q in &ds.queries {
        base.push(run_baseline(q, &ds.corpus, &retriever, &GoldEchoGenerator, 3)?);
        ideal.push(run_ideal_reranker(q, &ds.corpus, &classifier, &retriever, &GoldEchoGenerator, 10)?);
    }
    for metric in [Metric::Em, Metric::F1] {
        let (t, unmatched) = compare_records(&ideal, &base, &ds.queries, metric, AnswerMode::default())?;
        println!(
            "ideal-reranker vs baseline-k3 {}: n={} t={:.4} p={:.4} unmatched={unmatched}",
            metric.tag(),
            t.n,
            t.t,
            t.p
        );
    }
    Ok(())
}
