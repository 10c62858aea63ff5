//! Ideal retriever at several context sizes: fixed k, classifier k and the
//! gold hop count.

use ragkit::evaluation::{aggregate, emit_report, ReportFormat};
use ragkit::gateway::{HeuristicClassifier, PositionSensitiveGenerator};
use ragkit::pipelines::{run_ideal_retriever, KPolicy};
use ragkit::synthetic::{musique_dataset, SyntheticSpec};

fn main() -> ragkit::Result<()> {
    let ds = musique_dataset(&SyntheticSpec::new(30, 20, 10, 9))?;
    let classifier = HeuristicClassifier::default();
    let mut records = Vec::new();
    for policy in [KPolicy::Fixed(2), KPolicy::Fixed(3), KPolicy::Fixed(5), KPolicy::Classifier, KPolicy::Ideal] {
        for q in &ds.queries {
            records.push(run_ideal_retriever(q, &ds.corpus, &classifier, &PositionSensitiveGenerator, policy, 9)?);
        }
    }
    print!("{}", emit_report(&aggregate(&records, &ds.queries)?, ReportFormat::Table));
    Ok(())
}
