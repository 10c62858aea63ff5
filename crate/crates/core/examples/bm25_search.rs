//! Build a BM25 index over a small corpus and search it.

use ragkit::corpus::{CorpusStore, Passage};
use ragkit::retrieval::{build_bm25_index, search_bm25, Bm25Params};

fn main() -> ragkit::Result<()> {
    let mut corpus = CorpusStore::new();
    for (title, body) in [
        ("Danube", "The Danube flows through Vienna and Budapest into the Black Sea."),
        ("Rhine", "The Rhine rises in the Swiss Alps and reaches the North Sea."),
        ("Vienna", "Vienna is the capital of Austria and lies on the Danube."),
        ("Budapest", "Budapest is split by the Danube into Buda and Pest."),
    ] {
        corpus.insert(Passage::new(Some(title), body, "demo")?);
    }
    let index = build_bm25_index(&corpus)?;
    println!(
        "{} docs, {} terms, avg length {:.2}",
        index.num_docs(),
        index.vocabulary_size(),
        index.avg_doc_len()
    );
    for hit in search_bm25(&index, Bm25Params::default(), "which river flows through Vienna", 3) {
        let p = corpus.require(&hit.passage_id)?;
        println!("{}. {:.4} {}", hit.rank, hit.score, p.display_text());
    }
    Ok(())
}
