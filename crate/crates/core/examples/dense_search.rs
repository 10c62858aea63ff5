//! Exhaustive cosine search over an embedding sidecar, round-tripped
//! through both on-disk formats.

use ragkit::retrieval::{search_dense, EmbeddingMatrix};
use ragkit::synthetic::{hashed_embedding, hashed_embeddings, musique_dataset, SyntheticSpec};

fn main() -> ragkit::Result<()> {
    let ds = musique_dataset(&SyntheticSpec::new(2, 1, 1, 7))?;
    let matrix = hashed_embeddings(&ds.corpus, 64)?;

    let dir = std::env::temp_dir().join("ragkit-dense-example");
    std::fs::create_dir_all(&dir).map_err(|e| ragkit::Error::io(&dir, e))?;
    let bin = dir.join("passages.emb");
    let txt = dir.join("passages.txt");
    matrix.write_binary(&bin)?;
    matrix.write_text(&txt)?;
    assert_eq!(EmbeddingMatrix::load(&bin)?, EmbeddingMatrix::load(&txt)?.aligned_to(&ds.corpus)?);

    let q = &ds.queries[0];
    println!("query: {}", q.text);
    for hit in search_dense(&matrix, &hashed_embedding(&q.text, 64), 5)? {
        let gold = if q.is_gold(&hit.passage_id) { "gold" } else { "" };
        println!("{}. {:.4} {} {gold}", hit.rank, hit.score, hit.passage_id);
    }
    Ok(())
}
