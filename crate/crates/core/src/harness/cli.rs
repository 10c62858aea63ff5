//! Command-line surface. `run_cli` returns the process exit status.
//!
//! Failures print one line to stderr:
//! `error stage=<stage|none> kind=<kind> message=<text>`.
//! Usage errors print clap's usage text and exit 2.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use super::config::ExperimentConfig;
use super::experiment::{read_records, run_experiment, run_study, StudyKind};
use crate::corpus::{ingest_dataset_with, write_queries, ChunkConfig, CorpusStore, DatasetFormat};
use crate::error::{Error, Result};
use crate::evaluation::{
    aggregate_outcomes, compare_outcomes, embedded_outcomes, emit_report, Metric, ReportFormat,
};
use crate::retrieval::{build_bm25_index, search_bm25, Bm25Params, EmbeddingMatrix};

#[derive(Debug, Parser)]
#[command(name = "ragkit", version, about = "Adaptive-context RAG experiment toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Experiment config (TOML).
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Validate the config and exit without doing any work.
    #[arg(long)]
    pub dry_run: bool,
}

#[derive(Debug, Args)]
pub struct DatasetArgs {
    /// Dataset file.
    #[arg(long)]
    pub input: PathBuf,
    /// musique, wiki2hop or multihoprag.
    #[arg(long)]
    pub format: DatasetFormat,
    #[arg(long, default_value_t = ChunkConfig::default().chunk_words)]
    pub chunk_words: usize,
    #[arg(long, default_value_t = ChunkConfig::default().overlap_words)]
    pub overlap_words: usize,
}

impl DatasetArgs {
    fn chunking(&self) -> ChunkConfig {
        ChunkConfig {
            chunk_words: self.chunk_words,
            overlap_words: self.overlap_words,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse a dataset; optionally dump the normalized corpus and queries.
    Ingest {
        #[command(flatten)]
        data: DatasetArgs,
        /// Directory receiving corpus.jsonl and queries.jsonl.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build the BM25 index and print its statistics; optionally search it.
    Index {
        #[command(flatten)]
        data: DatasetArgs,
        #[arg(long, default_value_t = Bm25Params::default().k1)]
        k1: f64,
        #[arg(long, default_value_t = Bm25Params::default().b)]
        b: f64,
        /// Query text to search for.
        #[arg(long)]
        query: Option<String>,
        #[arg(long, default_value_t = 5)]
        k: usize,
    },
    /// Convert an embedding sidecar (text or binary) to the binary format.
    EmbedImport {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Corpus dump to align rows to; rows are reordered and checked.
        #[arg(long)]
        corpus: Option<PathBuf>,
    },
    /// Run every configured pipeline and study.
    Run(RunArgs),
    /// Run only the distractor study.
    StudyDistractor(RunArgs),
    /// Run only the position study.
    StudyPosition(RunArgs),
    /// Run only the ideal-retriever oracle study.
    Oracle(RunArgs),
    /// Paired t-test between two records files.
    Ttest {
        a: PathBuf,
        b: PathBuf,
        #[arg(long, default_value = "f1")]
        metric: Metric,
    },
    /// Aggregate records files (or directories of them) into a report.
    Report {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long, default_value = "table")]
        format: ReportFormat,
    },
}

/// Parses `argv` and executes it, writing results to `out`.
pub fn run_cli<I, T>(argv: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(cli.command, out) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", error_line(&e));
            1
        }
    }
}

pub fn error_line(e: &Error) -> String {
    let message = e.to_string().replace(['\n', '\r'], " ");
    format!("error stage={} kind={} message={message}", e.stage().unwrap_or("none"), e.kind())
}

fn load_config(args: &RunArgs) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(&args.config).map_err(|e| e.at_stage("config"))?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    cfg.validate().map_err(|e| e.at_stage("validate"))?;
    Ok(cfg)
}

fn emit(out: &mut dyn Write, text: &str) -> Result<()> {
    out.write_all(text.as_bytes()).map_err(|e| Error::io("<stdout>", e))
}

fn record_files(inputs: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for p in inputs {
        if p.is_dir() {
            let mut inner: Vec<PathBuf> = fs::read_dir(p)
                .map_err(|e| Error::io(p, e))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
                .collect();
            inner.sort();
            files.extend(inner);
        } else {
            files.push(p.clone());
        }
    }
    if files.is_empty() {
        return Err(Error::invalid("no records files found"));
    }
    Ok(files)
}

fn study(args: &RunArgs, kind: Option<StudyKind>, out: &mut dyn Write) -> Result<()> {
    let cfg = load_config(args)?;
    if args.dry_run {
        return emit(out, "config ok\n");
    }
    let result = match kind {
        None => run_experiment(&cfg)?,
        Some(k) => run_study(&cfg, k)?,
    };
    if !result.report.rows.is_empty() {
        emit(out, &emit_report(&result.report, ReportFormat::Table))?;
    }
    for (d, s) in &result.studies {
        emit(out, &format!("{} study, {d}\n{}", s.study, s.to_table()))?;
    }
    if let Some(o) = &result.oracle {
        emit(out, &emit_report(o, ReportFormat::Table))?;
    }
    emit(out, &format!("outputs written to {}\n", result.output_dir.display()))
}

fn execute(command: Command, out: &mut dyn Write) -> Result<()> {
    match command {
        Command::Ingest { data, out: dir } => {
            let ds = ingest_dataset_with(&data.input, data.format, data.chunking()).map_err(|e| e.at_stage("ingest"))?;
            emit(
                out,
                &format!(
                    "passages={} queries={} rejected={}\n",
                    ds.corpus.len(),
                    ds.queries.len(),
                    ds.rejected.len()
                ),
            )?;
            for (h, n) in ds.hop_histogram() {
                emit(out, &format!("hops={h} queries={n}\n"))?;
            }
            if let Some(dir) = dir {
                fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
                ds.corpus.write_dump(&dir.join("corpus.jsonl"))?;
                write_queries(&dir.join("queries.jsonl"), &ds.queries)?;
            }
            Ok(())
        }
        Command::Index { data, k1, b, query, k } => {
            let ds = ingest_dataset_with(&data.input, data.format, data.chunking()).map_err(|e| e.at_stage("ingest"))?;
            let index = build_bm25_index(&ds.corpus).map_err(|e| e.at_stage("index"))?;
            emit(
                out,
                &format!(
                    "docs={} vocabulary={} avg_doc_len={:.4}\n",
                    index.num_docs(),
                    index.vocabulary_size(),
                    index.avg_doc_len()
                ),
            )?;
            if let Some(q) = query {
                for (rank, hit) in search_bm25(&index, Bm25Params::new(k1, b)?, &q, k).iter().enumerate() {
                    emit(out, &format!("{}\t{}\t{:.6}\n", rank + 1, hit.passage_id, hit.score))?;
                }
            }
            Ok(())
        }
        Command::EmbedImport { input, output, corpus } => {
            let mut m = EmbeddingMatrix::load(&input).map_err(|e| e.at_stage("embed-import"))?;
            if let Some(c) = corpus {
                m = m.aligned_to(&CorpusStore::read_dump(&c)?).map_err(|e| e.at_stage("embed-import"))?;
            }
            m.write_binary(&output)?;
            emit(out, &format!("rows={} dim={} written={}\n", m.len(), m.dim(), output.display()))
        }
        Command::Run(a) => study(&a, None, out),
        Command::StudyDistractor(a) => study(&a, Some(StudyKind::Distractor), out),
        Command::StudyPosition(a) => study(&a, Some(StudyKind::Position), out),
        Command::Oracle(a) => study(&a, Some(StudyKind::Oracle), out),
        Command::Ttest { a, b, metric } => {
            let load = |p: &Path| -> Result<_> { embedded_outcomes(&read_records(p)?) };
            let (r, unmatched) = compare_outcomes(&load(&a)?, &load(&b)?, metric).map_err(|e| e.at_stage("ttest"))?;
            emit(
                out,
                &format!(
                    "metric={} n={} unmatched={unmatched} t={} df={} p={} degenerate={}\n",
                    metric.tag(),
                    r.n,
                    r.t,
                    r.df,
                    r.p,
                    r.degenerate
                ),
            )
        }
        Command::Report { inputs, format } => {
            let mut records = Vec::new();
            for f in record_files(&inputs)? {
                records.extend(read_records(&f)?);
            }
            let outcomes = embedded_outcomes(&records).map_err(|e| e.at_stage("report"))?;
            emit(out, &emit_report(&aggregate_outcomes(&records, &outcomes), format))
        }
    }
}

