//! BM25 candidates rescored by a cross-encoder-style pair scorer.

use std::sync::Arc;

use ragkit::retrieval::{build_bm25_index, Bm25Params, Bm25Retriever, Retriever, TermOverlapScorer, TwoStageRetriever};
use ragkit::synthetic::{musique_dataset, SyntheticSpec};

fn main() -> ragkit::Result<()> {
    let ds = musique_dataset(&SyntheticSpec::new(3, 0, 0, 1))?;
    let corpus = Arc::new(ds.corpus);
    let index = Arc::new(build_bm25_index(&corpus)?);
    let first = Bm25Retriever::new(index.clone(), Bm25Params::default());
    let two = TwoStageRetriever::new(
        "BM25+Rerank",
        Box::new(Bm25Retriever::new(index, Bm25Params::default())),
        Box::new(TermOverlapScorer),
        corpus.clone(),
        20,
    );
    let q = &ds.queries[0];
    println!("query: {}", q.text);
    for r in [&first as &dyn Retriever, &two] {
        let ids: Vec<String> = r.retrieve(q, 5)?.into_iter().map(|p| p.passage_id).collect();
        println!("{:<12} {}", r.name(), ids.join(" "));
    }
    Ok(())
}
