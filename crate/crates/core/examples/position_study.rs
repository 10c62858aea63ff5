//! Same context, gold block moved to the beginning, middle and end.

use ragkit::evaluation::AnswerMode;
use ragkit::gateway::PositionSensitiveGenerator;
use ragkit::harness::position_study;
use ragkit::pipelines::{assemble_context, OrderingStrategy};
use ragkit::synthetic::{musique_dataset, SyntheticSpec};

fn main() -> ragkit::Result<()> {
    let ids: Vec<String> = ["g1", "g2", "d1", "d2", "d3"].map(String::from).to_vec();
    let gold: Vec<String> = vec!["g1".into(), "g2".into()];
    for s in OrderingStrategy::POSITIONAL {
        println!("{:<10} {}", s.tag(), assemble_context(&ids, &gold, s, 5)?.join(" "));
    }
    let ds = musique_dataset(&SyntheticSpec::new(10, 10, 10, 2))?;
    let r = position_study(&ds.queries, &ds.corpus, &PositionSensitiveGenerator, 5, 2, AnswerMode::default())?;
    print!("\n{}", r.to_table());
    Ok(())
}
