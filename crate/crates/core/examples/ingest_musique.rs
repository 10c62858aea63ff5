//! Ingest a MuSiQue-format file, inspect it and dump the normalized corpus.
//!
//! Usage: `cargo run --example ingest_musique [path]`. Without a path a
//! synthetic file is generated first.

use std::path::PathBuf;

use ragkit::corpus::{ingest_dataset, DatasetFormat};
use ragkit::synthetic::{write_musique, SyntheticSpec};

fn main() -> ragkit::Result<()> {
    let dir = std::env::temp_dir().join("ragkit-ingest-example");
    std::fs::create_dir_all(&dir).map_err(|e| ragkit::Error::io(&dir, e))?;
    let path = match std::env::args().nth(1) {
        Some(p) => PathBuf::from(p),
        None => {
            let p = dir.join("musique.jsonl");
            write_musique(&p, &SyntheticSpec::new(4, 3, 2, 1))?;
            p
        }
    };
    let ds = ingest_dataset(&path, DatasetFormat::Musique)?;
    println!("{} passages, {} queries, {} rejected", ds.corpus.len(), ds.queries.len(), ds.rejected.len());
    for (hops, n) in ds.hop_histogram() {
        println!("  {hops}-hop: {n}");
    }
    let q = &ds.queries[0];
    println!("{} [{} hops] {}\n  answers: {:?}\n  gold: {:?}", q.id, q.hops, q.text, q.answers, q.gold_ids);
    let dump = dir.join("corpus.jsonl");
    ds.corpus.write_dump(&dump)?;
    println!("corpus dump written to {}", dump.display());
    Ok(())
}
