//! Every pipeline over one synthetic dataset with local model stand-ins,
//! aggregated into a report.

use std::sync::Arc;

use ragkit::evaluation::{aggregate, emit_report, ReportFormat};
use ragkit::gateway::{GoldAwareRanker, GoldEchoGenerator, OracleClassifier};
use ragkit::pipelines::{run_queries, Components, KPolicy, PipelineKind};
use ragkit::retrieval::{build_bm25_index, Bm25Params, Bm25Retriever};
use ragkit::synthetic::{musique_dataset, SyntheticSpec};

fn main() -> ragkit::Result<()> {
    let ds = musique_dataset(&SyntheticSpec::new(20, 15, 10, 3))?;
    let retriever = Bm25Retriever::new(Arc::new(build_bm25_index(&ds.corpus)?), Bm25Params::default());
    let components = Components {
        dataset: "synthetic",
        corpus: &ds.corpus,
        retriever: &retriever,
        classifier: &OracleClassifier::default(),
        reranker: &GoldAwareRanker,
        generator: &GoldEchoGenerator,
        seed: 3,
    };
    let pipelines = [
        PipelineKind::Baseline { k_fixed: 5 },
        PipelineKind::ClassifierK,
        PipelineKind::ClassifierLlm { first_stage_k: 5, structured: false },
        PipelineKind::ClassifierLlm { first_stage_k: 5, structured: true },
        PipelineKind::Control { first_stage_k: 5 },
        PipelineKind::IdealRetriever { k_policy: KPolicy::Ideal },
        PipelineKind::IdealReranker { k_fixed: 5 },
    ];
    let mut records = Vec::new();
    for kind in pipelines {
        for r in run_queries(kind, &ds.queries, &components) {
            records.push(r?);
        }
    }
    let report = aggregate(&records, &ds.queries)?;
    print!("{}", emit_report(&report, ReportFormat::Table));
    Ok(())
}
