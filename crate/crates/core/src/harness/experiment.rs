//! Config-driven experiment runs.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::seq::IndexedRandom;

use super::config::{
    ClassifierMode, ExperimentConfig, GeneratorMode, QueryEncoderMode, RerankerMode, RetrieverConfig, ScorerMode,
};
use super::studies::{distractor_study, position_study, StudyResult};
use crate::corpus::{ingest_dataset_with, train_eval_split, CorpusStore, Query};
use crate::error::{Error, Result};
use crate::evaluation::{
    aggregate_outcomes, compare_outcomes, emit_report, evaluate_record, EvalOutcome, Report, ReportFormat,
    TTestResult,
};
use crate::gateway::{
    AuditLog, ChatClient, EchoRanker, FaultInjectingRanker, FixedReplyRanker, Generator, GoldAwareRanker,
    GoldEchoGenerator, HeuristicClassifier, HopClassifier, LabelMap, OracleClassifier, PositionSensitiveGenerator,
    PromptTemplate, RemoteClassifier, RemoteEmbedder, RemoteGenerator, RemotePairScorer, RerankModel,
};
use crate::pipelines::{run_queries, Components, KPolicy, PipelineKind, RunRecord};
use crate::retrieval::{
    build_bm25_index, Bm25Params, Bm25Retriever, CandidateListRetriever, CannedQueryVectors, DenseRetriever,
    EmbeddingMatrix, PairScorer, QueryEncoder, Retriever, TermOverlapScorer, TwoStageRetriever,
};
use crate::seed::rng_for;
use crate::synthetic::{hashed_embeddings, HashedEncoder};

/// A dataset ready to run: its corpus and the queries under evaluation.
pub struct LoadedDataset {
    pub label: String,
    pub corpus: Arc<CorpusStore>,
    pub queries: Vec<Query>,
}

pub fn load_datasets(cfg: &ExperimentConfig) -> Result<Vec<LoadedDataset>> {
    cfg.datasets
        .iter()
        .map(|d| {
            let ds = ingest_dataset_with(&d.path, d.format, d.chunking())?;
            let mut queries = ds.queries;
            if let Some(f) = d.train_fraction {
                queries = train_eval_split(&queries, f, cfg.seed)?.1;
            }
            if let Some(limit) = d.limit {
                queries.truncate(limit);
            }
            if queries.is_empty() {
                return Err(Error::Config(format!("dataset {} has no queries to evaluate", d.label())));
            }
            Ok(LoadedDataset {
                label: d.label(),
                corpus: Arc::new(ds.corpus),
                queries,
            })
        })
        .collect()
}

pub fn build_retriever(
    cfg: &ExperimentConfig,
    spec: &RetrieverConfig,
    data: &LoadedDataset,
    audit: &Option<Arc<AuditLog>>,
) -> Result<Box<dyn Retriever>> {
    Ok(match spec {
        RetrieverConfig::Bm25 { k1, b, .. } => {
            let index = Arc::new(build_bm25_index(&data.corpus)?);
            Box::new(Bm25Retriever::new(index, Bm25Params::new(*k1, *b)?))
        }
        RetrieverConfig::Dense {
            embeddings,
            query_embeddings,
            query_encoder,
            hashed_dim,
            ..
        } => {
            let matrix = match embeddings {
                Some(path) => EmbeddingMatrix::load(path)?.aligned_to(&data.corpus)?,
                None => hashed_embeddings(&data.corpus, *hashed_dim)?,
            };
            let encoder: Box<dyn QueryEncoder> = match query_encoder {
                QueryEncoderMode::Canned => {
                    let path = query_embeddings
                        .as_ref()
                        .ok_or_else(|| Error::Config("canned query encoder needs query_embeddings".into()))?;
                    Box::new(CannedQueryVectors(Arc::new(EmbeddingMatrix::load(path)?)))
                }
                QueryEncoderMode::Remote => Box::new(RemoteEmbedder::new(
                    cfg.endpoints.require("embedder")?,
                    audit.clone(),
                )?),
                QueryEncoderMode::Hashed => Box::new(HashedEncoder { dim: matrix.dim() }),
            };
            Box::new(DenseRetriever::new(Arc::new(matrix), encoder))
        }
        RetrieverConfig::TwoStage {
            first_stage,
            candidate_k,
            scorer,
            ..
        } => {
            let first = build_retriever(cfg, first_stage, data, audit)?;
            let scorer: Box<dyn PairScorer> = match scorer {
                ScorerMode::Remote => Box::new(RemotePairScorer::new(cfg.endpoints.require("scorer")?, audit.clone())?),
                ScorerMode::TermOverlap => Box::new(TermOverlapScorer),
            };
            Box::new(TwoStageRetriever::new(
                spec.label(),
                first,
                scorer,
                data.corpus.clone(),
                *candidate_k,
            ))
        }
        RetrieverConfig::Candidates { .. } => Box::new(CandidateListRetriever),
    })
}

/// Report-facing name: the configured label rather than the retriever's
/// built-in one.
struct Named {
    name: String,
    inner: Box<dyn Retriever>,
}

impl Retriever for Named {
    fn name(&self) -> &str {
        &self.name
    }

    fn retrieve(&self, query: &Query, k: usize) -> Result<Vec<crate::retrieval::RetrievedPassage>> {
        self.inner.retrieve(query, k)
    }
}

/// The model roles as configured, for one dataset.
pub struct Gateways {
    pub classifier: Box<dyn HopClassifier>,
    pub generator: Box<dyn Generator>,
    pub reranker: Box<dyn RerankModel>,
    /// Query ids whose rerank reply is sabotaged by fault injection.
    pub planted: Vec<String>,
}

/// Exactly `round(rate * N)` query ids, seeded per dataset.
pub fn plant_failures(queries: &[Query], rate: f64, seed: u64, dataset: &str) -> Vec<String> {
    let n = (rate * queries.len() as f64).round() as usize;
    let mut rng = rng_for(seed, &format!("fault-injection\u{1f}{dataset}"));
    let mut ids: Vec<String> = queries
        .choose_multiple(&mut rng, n.min(queries.len()))
        .map(|q| q.id.clone())
        .collect();
    ids.sort();
    ids
}

pub fn build_gateways(
    cfg: &ExperimentConfig,
    data: &LoadedDataset,
    audit: &Option<Arc<AuditLog>>,
) -> Result<Gateways> {
    let labels = LabelMap::with_overrides(&cfg.classifier.overrides()?)?;
    let classifier: Box<dyn HopClassifier> = match cfg.classifier.mode {
        ClassifierMode::Oracle => Box::new(OracleClassifier { labels }),
        ClassifierMode::Heuristic => Box::new(HeuristicClassifier { labels }),
        ClassifierMode::Remote => Box::new(RemoteClassifier::new(
            cfg.endpoints.require("classifier")?,
            labels,
            audit.clone(),
        )?),
    };
    let generator: Box<dyn Generator> = match cfg.generator.mode {
        GeneratorMode::GoldEcho => Box::new(GoldEchoGenerator),
        GeneratorMode::PositionSensitive => Box::new(PositionSensitiveGenerator),
        GeneratorMode::Remote => {
            let template = match &cfg.generator.template {
                Some(t) => PromptTemplate::new(t.clone())?,
                None => PromptTemplate::default(),
            };
            let chat = ChatClient::new(
                "generator",
                cfg.endpoints.require("generator")?,
                cfg.generator.max_tokens,
                audit.clone(),
            )?
            .with_seed(cfg.seed);
            Box::new(RemoteGenerator::new(chat, template))
        }
    };
    let inner: Box<dyn RerankModel> = match cfg.reranker.mode {
        RerankerMode::Echo => Box::new(EchoRanker),
        RerankerMode::GoldAware => Box::new(GoldAwareRanker),
        RerankerMode::Fixed => Box::new(FixedReplyRanker(cfg.reranker.reply.clone().unwrap_or_default())),
        RerankerMode::Remote => Box::new(
            ChatClient::new(
                "reranker",
                cfg.endpoints.require("reranker")?,
                cfg.reranker.max_tokens,
                audit.clone(),
            )?
            .with_seed(cfg.seed),
        ),
    };
    let planted = plant_failures(&data.queries, cfg.reranker.fail_rate, cfg.seed, &data.label);
    let reranker: Box<dyn RerankModel> = if planted.is_empty() {
        inner
    } else {
        Box::new(FaultInjectingRanker::new(inner, planted.clone()))
    };
    Ok(Gateways {
        classifier,
        generator,
        reranker,
        planted,
    })
}

/// `[A-Za-z0-9._+-]` kept, everything else becomes `_`.
pub fn file_stem(parts: &[&str]) -> String {
    parts
        .iter()
        .map(|p| {
            p.chars()
                .map(|c| if c.is_ascii_alphanumeric() || "._+-".contains(c) { c } else { '_' })
                .collect::<String>()
        })
        .collect::<Vec<_>>()
        .join("__")
}

pub fn write_records(path: &Path, records: &[RunRecord]) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_records(path: &Path) -> Result<Vec<RunRecord>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::MalformedRecord {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TTestRow {
    pub dataset: String,
    pub retriever: String,
    pub reference: String,
    pub pipeline: String,
    pub metric: String,
    pub unmatched: usize,
    pub result: TTestResult,
}

pub fn emit_ttests(rows: &[TTestRow]) -> String {
    let mut out = String::from("Dataset\tRetrieval\tReference\tPipeline\tmetric\tn\tunmatched\tt\tdf\tp\tdegenerate\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            r.dataset,
            r.retriever,
            r.reference,
            r.pipeline,
            r.metric,
            r.result.n,
            r.unmatched,
            r.result.t,
            r.result.df,
            r.result.p,
            r.result.degenerate
        );
    }
    out
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub report: Report,
    pub ttests: Vec<TTestRow>,
    /// `(dataset, study)` pairs.
    pub studies: Vec<(String, StudyResult)>,
    pub oracle: Option<Report>,
    /// Planted rerank failures per dataset.
    pub planted: BTreeMap<String, usize>,
    pub output_dir: PathBuf,
}

fn with_pool<T: Send>(workers: usize, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    pool.install(f)
}

fn open_audit(dir: &Path) -> Result<Option<Arc<AuditLog>>> {
    Ok(Some(Arc::new(AuditLog::open(&dir.join("audit.jsonl"))?)))
}

fn score_all(records: &mut [RunRecord], queries: &[Query], cfg: &ExperimentConfig) -> Result<()> {
    let by_id: std::collections::HashMap<&str, &Query> = queries.iter().map(|q| (q.id.as_str(), q)).collect();
    for r in records.iter_mut() {
        let q = by_id
            .get(r.query_id.as_str())
            .ok_or_else(|| Error::UnknownQuery(r.query_id.clone()))?;
        r.eval = Some(evaluate_record(r, q, cfg.evaluation.answer_mode));
    }
    Ok(())
}

/// Runs one pipeline over a dataset, writes its records file and returns the
/// scored records. Successful records are written even when some queries
/// fail; the first failure is then returned.
fn run_one(
    cfg: &ExperimentConfig,
    kind: PipelineKind,
    data: &LoadedDataset,
    retriever: &dyn Retriever,
    gw: &Gateways,
    records_dir: &Path,
) -> Result<Vec<RunRecord>> {
    let c = Components {
        dataset: &data.label,
        corpus: &data.corpus,
        retriever,
        classifier: gw.classifier.as_ref(),
        reranker: gw.reranker.as_ref(),
        generator: gw.generator.as_ref(),
        seed: cfg.seed,
    };
    let results = run_queries(kind, &data.queries, &c);
    let mut records = Vec::with_capacity(results.len());
    let mut first_err = None;
    for r in results {
        match r {
            Ok(rec) => records.push(rec),
            Err(e) if first_err.is_none() => first_err = Some(e),
            Err(_) => {}
        }
    }
    score_all(&mut records, &data.queries, cfg)?;
    let stem = file_stem(&[&data.label, retriever.name(), &kind.label()]);
    write_records(&records_dir.join(format!("{stem}.jsonl")), &records)?;
    match first_err {
        Some(e) => Err(e.at_stage("run")),
        None => Ok(records),
    }
}

struct IdealOnly;

impl Retriever for IdealOnly {
    fn name(&self) -> &str {
        "Ideal"
    }

    fn retrieve(&self, _query: &Query, _k: usize) -> Result<Vec<crate::retrieval::RetrievedPassage>> {
        Err(Error::invalid("ideal-retriever pipelines do not call a retriever"))
    }
}

fn reference_label(cfg: &ExperimentConfig) -> Option<String> {
    cfg.evaluation.reference.clone().or_else(|| {
        cfg.pipelines
            .iter()
            .find(|p| matches!(p, PipelineKind::Baseline { .. }))
            .map(|p| p.label())
    })
}

fn ttests_for(
    cfg: &ExperimentConfig,
    groups: &[(String, String, String, Vec<EvalOutcome>)],
) -> Result<Vec<TTestRow>> {
    let Some(reference) = reference_label(cfg) else {
        return Ok(Vec::new());
    };
    let metric = cfg.evaluation.ttest_metric;
    let mut rows = Vec::new();
    for (d, r, p, outcomes) in groups {
        if *p == reference {
            continue;
        }
        let base = groups
            .iter()
            .find(|(d2, r2, p2, _)| d2 == d && p2 == &reference && (r2 == r || r == "Ideal"));
        let Some((_, base_r, _, base_outcomes)) = base else {
            continue;
        };
        match compare_outcomes(outcomes, base_outcomes, metric) {
            Ok((result, unmatched)) => rows.push(TTestRow {
                dataset: d.clone(),
                retriever: if r == "Ideal" { base_r.clone() } else { r.clone() },
                reference: reference.clone(),
                pipeline: p.clone(),
                metric: metric.tag().into(),
                unmatched,
                result,
            }),
            Err(e) => log::warn!("t-test {d}/{r}/{p} skipped: {e}"),
        }
    }
    Ok(rows)
}

/// Executes every configured pipeline, writes records, reports, t-tests and
/// any configured studies under `output_dir`.
///
/// Layout:
/// `records/{dataset}__{retriever}__{pipeline}.jsonl`, `report.txt`,
/// `report.tsv`, `ttests.tsv`, `audit.jsonl`, and per configured study
/// `{study}__{dataset}.txt` / `.tsv`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate().map_err(|e| e.at_stage("validate"))?;
    let out = cfg.output_dir.clone();
    let records_dir = out.join("records");
    create_dir(&records_dir).map_err(|e| e.at_stage("output"))?;
    let audit = open_audit(&out).map_err(|e| e.at_stage("output"))?;
    let datasets = load_datasets(cfg).map_err(|e| e.at_stage("ingest"))?;

    with_pool(cfg.workers, || {
        let mut all_records = Vec::new();
        let mut groups = Vec::new();
        let mut planted = BTreeMap::new();
        let mut studies = Vec::new();
        let mut oracle = Report::default();
        for data in &datasets {
            let gw = build_gateways(cfg, data, &audit).map_err(|e| e.at_stage("gateway"))?;
            planted.insert(data.label.clone(), gw.planted.len());
            let retrievers: Vec<Named> = if cfg.pipelines.iter().any(|p| p.needs_retriever()) {
                cfg.retrievers
                    .iter()
                    .map(|spec| {
                        Ok(Named {
                            name: spec.label(),
                            inner: build_retriever(cfg, spec, data, &audit)?,
                        })
                    })
                    .collect::<Result<_>>()
                    .map_err(|e| e.at_stage("index"))?
            } else {
                Vec::new()
            };
            for &kind in &cfg.pipelines {
                let targets: Vec<&dyn Retriever> = if kind.needs_retriever() {
                    retrievers.iter().map(|r| r as &dyn Retriever).collect()
                } else {
                    vec![&IdealOnly]
                };
                for r in targets {
                    let recs = run_one(cfg, kind, data, r, &gw, &records_dir)?;
                    let outcomes: Vec<EvalOutcome> = recs.iter().filter_map(|r| r.eval.clone()).collect();
                    groups.push((data.label.clone(), r.name().to_string(), kind.label(), outcomes));
                    all_records.extend(recs);
                }
            }
            studies.extend(run_studies(cfg, data, &gw)?);
            if let Some(o) = &cfg.studies.oracle {
                oracle.extend(oracle_report(cfg, data, &gw, &o.fixed_k, &records_dir)?);
            }
        }

        let outcomes: Vec<EvalOutcome> = all_records.iter().filter_map(|r| r.eval.clone()).collect();
        let report = if all_records.is_empty() {
            Report::default()
        } else {
            aggregate_outcomes(&all_records, &outcomes)
        };
        let ttests = ttests_for(cfg, &groups)?;
        let write = || -> Result<()> {
            write_text(&out.join("report.txt"), &emit_report(&report, ReportFormat::Table))?;
            write_text(&out.join("report.tsv"), &emit_report(&report, ReportFormat::Tsv))?;
            write_text(&out.join("ttests.tsv"), &emit_ttests(&ttests))?;
            for (d, s) in &studies {
                let stem = file_stem(&[&s.study, d]);
                write_text(&out.join(format!("{stem}.txt")), &s.to_table())?;
                write_text(&out.join(format!("{stem}.tsv")), &s.to_long_tsv())?;
            }
            if !oracle.rows.is_empty() {
                write_text(&out.join("oracle.txt"), &emit_report(&oracle, ReportFormat::Table))?;
                write_text(&out.join("oracle.tsv"), &emit_report(&oracle, ReportFormat::Tsv))?;
            }
            Ok(())
        };
        write().map_err(|e| e.at_stage("output"))?;
        Ok(ExperimentOutput {
            report,
            ttests,
            studies,
            oracle: (!oracle.rows.is_empty()).then_some(oracle),
            planted,
            output_dir: out.clone(),
        })
    })
}

fn run_studies(cfg: &ExperimentConfig, data: &LoadedDataset, gw: &Gateways) -> Result<Vec<(String, StudyResult)>> {
    let mode = cfg.evaluation.answer_mode;
    let mut out = Vec::new();
    if let Some(d) = &cfg.studies.distractor {
        let s = distractor_study(
            &data.queries,
            &data.corpus,
            gw.generator.as_ref(),
            &d.distractor_counts,
            cfg.seed,
            mode,
        )
        .map_err(|e| e.at_stage("study-distractor"))?;
        out.push((data.label.clone(), s));
    }
    if let Some(p) = &cfg.studies.position {
        let s = position_study(&data.queries, &data.corpus, gw.generator.as_ref(), p.total_slots, cfg.seed, mode)
            .map_err(|e| e.at_stage("study-position"))?;
        out.push((data.label.clone(), s));
    }
    Ok(out)
}

/// Ideal-retriever runs at each fixed k, at the classifier's k and at the
/// gold hop count.
fn oracle_report(
    cfg: &ExperimentConfig,
    data: &LoadedDataset,
    gw: &Gateways,
    fixed_k: &[usize],
    records_dir: &Path,
) -> Result<Report> {
    let policies = fixed_k
        .iter()
        .map(|&k| KPolicy::Fixed(k))
        .chain([KPolicy::Classifier, KPolicy::Ideal]);
    let mut records = Vec::new();
    for k_policy in policies {
        records.extend(
            run_one(cfg, PipelineKind::IdealRetriever { k_policy }, data, &IdealOnly, gw, records_dir)
                .map_err(|e| e.at_stage("oracle"))?,
        );
    }
    let outcomes: Vec<EvalOutcome> = records.iter().filter_map(|r| r.eval.clone()).collect();
    Ok(aggregate_outcomes(&records, &outcomes))
}

/// Which single study a study-only command runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StudyKind {
    Distractor,
    Position,
    Oracle,
}

/// Runs one study from a config, with defaults when the config has no
/// section for it. Pipelines in the config are ignored.
pub fn run_study(cfg: &ExperimentConfig, kind: StudyKind) -> Result<ExperimentOutput> {
    let mut cfg = cfg.clone();
    cfg.pipelines.clear();
    let studies = std::mem::take(&mut cfg.studies);
    match kind {
        StudyKind::Distractor => cfg.studies.distractor = Some(studies.distractor.unwrap_or_default()),
        StudyKind::Position => cfg.studies.position = Some(studies.position.unwrap_or_default()),
        StudyKind::Oracle => cfg.studies.oracle = Some(studies.oracle.unwrap_or_default()),
    }
    run_experiment(&cfg)
}
