//! Command-line surface: subcommands, exit codes and the one-line error.

use std::path::Path;
use std::process::Command;

use ragkit::harness::cli::run_cli;
use ragkit::synthetic::{hashed_embeddings, write_musique, SyntheticSpec};

fn run(args: &[&str]) -> (i32, String) {
    let mut out = Vec::new();
    let mut argv = vec!["ragkit"];
    argv.extend_from_slice(args);
    let code = run_cli(argv, &mut out);
    (code, String::from_utf8(out).unwrap())
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ragkit"))
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_config(dir: &Path, extra: &str) -> std::path::PathBuf {
    write_musique(&dir.join("data.jsonl"), &SyntheticSpec::new(5, 5, 5, 2)).unwrap();
    let text = format!(
        r#"seed = 3
output_dir = "out"

[[datasets]]
name = "syn"
path = "data.jsonl"
format = "musique"

[[pipelines]]
kind = "baseline"

[[pipelines]]
kind = "ideal_reranker"
{extra}"#
    );
    let path = dir.join("config.toml");
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn dry_run_validates_without_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "");
    let (code, out) = run(&["run", "--config", s(&cfg), "--dry-run"]);
    assert_eq!(code, 0, "{out}");
    assert!(!dir.path().join("out").exists());
}

#[test]
fn run_then_report_and_ttest_from_records() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "");
    let (code, out) = run(&["run", "--config", s(&cfg)]);
    assert_eq!(code, 0, "{out}");
    let records = dir.path().join("out/records");
    let a = records.join("syn__BM25__ideal-reranker-k5.jsonl");
    let b = records.join("syn__BM25__baseline-k5.jsonl");

    let (code, out) = run(&["ttest", s(&a), s(&b), "--metric", "em"]);
    assert_eq!(code, 0);
    for key in ["t=", "df=14", "p=", "n=15"] {
        assert!(out.contains(key), "{key} missing from {out}");
    }

    let (code, tsv) = run(&["report", s(&records), "--format", "tsv"]);
    assert_eq!(code, 0);
    let written = std::fs::read_to_string(dir.path().join("out/report.tsv")).unwrap();
    assert_eq!(tsv, written);
}

#[test]
fn seed_override_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[studies.position]\n");
    assert_eq!(run(&["study-position", "--config", s(&cfg), "--seed", "9"]).0, 0);
    let first = std::fs::read(dir.path().join("out/position__syn.tsv")).unwrap();
    assert_eq!(run(&["study-position", "--config", s(&cfg), "--seed", "9"]).0, 0);
    assert_eq!(first, std::fs::read(dir.path().join("out/position__syn.tsv")).unwrap());
}

#[test]
fn study_commands_write_their_tables() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "");
    assert_eq!(run(&["study-distractor", "--config", s(&cfg)]).0, 0);
    assert_eq!(run(&["oracle", "--config", s(&cfg)]).0, 0);
    let out = dir.path().join("out");
    assert!(out.join("distractor__syn.tsv").is_file());
    assert!(out.join("oracle.tsv").is_file());
    assert!(!out.join("records/syn__BM25__baseline-k5.jsonl").exists());
}

#[test]
fn ingest_index_and_embed_import() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data.jsonl");
    write_musique(&data, &SyntheticSpec::new(2, 1, 0, 1)).unwrap();

    let dump = dir.path().join("dump");
    let (code, out) = run(&["ingest", "--input", s(&data), "--format", "musique", "--out", s(&dump)]);
    assert_eq!(code, 0);
    assert!(out.contains("queries=3") && out.contains("hops=2 queries=2"), "{out}");
    assert!(dump.join("corpus.jsonl").is_file() && dump.join("queries.jsonl").is_file());

    let (code, out) = run(&["index", "--input", s(&data), "--format", "musique", "--query", "partner", "--k", "2"]);
    assert_eq!(code, 0);
    assert!(out.starts_with("docs="));
    assert_eq!(out.lines().filter(|l| l.contains('\t')).count(), 2);

    let corpus = ragkit::corpus::CorpusStore::read_dump(&dump.join("corpus.jsonl")).unwrap();
    let text = dir.path().join("emb.txt");
    hashed_embeddings(&corpus, 8).unwrap().write_text(&text).unwrap();
    let bin_path = dir.path().join("emb.bin");
    let (code, out) =
        run(&["embed-import", "--input", s(&text), "--output", s(&bin_path), "--corpus", s(&dump.join("corpus.jsonl"))]);
    assert_eq!(code, 0, "{out}");
    let m = ragkit::retrieval::EmbeddingMatrix::load(&bin_path).unwrap();
    assert_eq!((m.len(), m.dim()), (corpus.len(), 8));
}

#[test]
fn failures_print_one_machine_parseable_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "");
    std::fs::remove_file(dir.path().join("data.jsonl")).unwrap();
    let out = bin().args(["run", "--config", s(&cfg)]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8(out.stderr).unwrap();
    let lines: Vec<&str> = stderr.lines().collect();
    assert_eq!(lines.len(), 1, "{stderr}");
    assert!(lines[0].starts_with("error stage=validate kind="), "{}", lines[0]);
    assert!(lines[0].contains("message="));
}

#[test]
fn usage_errors_exit_2() {
    for args in [&["frobnicate"][..], &["run", "--bogus"], &["run"], &["ttest", "only-one"]] {
        let out = bin().args(args).output().unwrap();
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(!out.stderr.is_empty());
    }
}

#[test]
fn ttest_rejects_records_without_shared_queries() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.jsonl");
    std::fs::write(&a, "").unwrap();
    let (code, _) = run(&["ttest", s(&a), s(&a)]);
    assert_eq!(code, 1);
}
