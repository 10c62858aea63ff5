//! A complete config-driven run: pipelines, t-tests, studies and the run
//! directory they are written to.

use ragkit::harness::ExperimentConfig;
use ragkit::synthetic::{write_musique, SyntheticSpec};

const CONFIG: &str = r#"
seed = 11
workers = 4
output_dir = "run"

[[datasets]]
name = "synthetic"
path = "synthetic.jsonl"
format = "musique"

[[retrievers]]
kind = "bm25"

[[retrievers]]
kind = "dense"
hashed_dim = 128

[[pipelines]]
kind = "baseline"
k_fixed = 5

[[pipelines]]
kind = "classifier_k"

[[pipelines]]
kind = "classifier_llm"
first_stage_k = 5
structured = true

[[pipelines]]
kind = "ideal_reranker"

[reranker]
mode = "gold_aware"
fail_rate = 0.1

[evaluation]
ttest_metric = "f1"

[studies.distractor]
distractor_counts = [1, 2]

[studies.position]
total_slots = 5

[studies.oracle]
"#;

fn main() -> ragkit::Result<()> {
    let dir = std::env::temp_dir().join("ragkit-experiment-example");
    std::fs::create_dir_all(&dir).map_err(|e| ragkit::Error::io(&dir, e))?;
    write_musique(&dir.join("synthetic.jsonl"), &SyntheticSpec::new(20, 20, 20, 11))?;
    let cfg = ExperimentConfig::from_toml_str(CONFIG, &dir)?;
    let out = ragkit::harness::run_experiment(&cfg)?;
    print!("{}", ragkit::evaluation::emit_report(&out.report, ragkit::evaluation::ReportFormat::Table));
    print!("\n{}", ragkit::harness::emit_ttests(&out.ttests));
    println!("\nplanted rerank failures: {:?}", out.planted);
    println!("outputs in {}", out.output_dir.display());
    Ok(())
}
