//! Answer quality as gold passages, then distractors, are added.

use ragkit::evaluation::AnswerMode;
use ragkit::gateway::GoldEchoGenerator;
use ragkit::harness::{distractor_contexts, distractor_study};
use ragkit::synthetic::{musique_dataset, SyntheticSpec};

fn main() -> ragkit::Result<()> {
    let ds = musique_dataset(&SyntheticSpec::new(10, 10, 10, 4))?;
    for (label, ids) in distractor_contexts(&ds.queries[0], &[1, 2], 4)? {
        println!("{label:<8} {}", ids.join(" "));
    }
    let result = distractor_study(&ds.queries, &ds.corpus, &GoldEchoGenerator, &[1, 2], 4, AnswerMode::default())?;
    print!("\n{}\n{}", result.to_table(), result.to_long_tsv());
    Ok(())
}
