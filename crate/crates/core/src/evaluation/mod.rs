//! Answer and retrieval metrics, aggregation and reports.

mod metrics;
mod ttest;

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

pub use metrics::{
    exact_match, exact_match_with, f1_score, f1_score_with, normalize_answer, precision_recall, AnswerMode,
    PrecisionRecall,
};
pub use ttest::{paired_t_test, TTestResult};

use crate::corpus::Query;
use crate::error::{Error, Result};
use crate::pipelines::RunRecord;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalOutcome {
    pub query_id: String,
    pub hops: u8,
    pub em: u8,
    pub f1: f64,
    /// `None` when the context was empty.
    pub precision: Option<f64>,
    pub recall: f64,
    pub flagged: bool,
}

pub fn evaluate_record(record: &RunRecord, query: &Query, mode: AnswerMode) -> EvalOutcome {
    let pr = precision_recall(&record.context_ids, &query.gold_ids);
    EvalOutcome {
        query_id: record.query_id.clone(),
        hops: query.hops,
        em: exact_match_with(&record.answer, &query.answers, mode),
        f1: f1_score_with(&record.answer, &query.answers, mode),
        precision: pr.precision,
        recall: pr.recall,
        flagged: record.flagged,
    }
}

/// Which per-query score feeds the significance test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Em,
    #[default]
    F1,
}

impl Metric {
    pub fn of(self, o: &EvalOutcome) -> f64 {
        match self {
            Metric::Em => f64::from(o.em),
            Metric::F1 => o.f1,
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            Metric::Em => "em",
            Metric::F1 => "f1",
        }
    }
}

impl std::str::FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "em" => Ok(Metric::Em),
            "f1" => Ok(Metric::F1),
            other => Err(Error::invalid(format!("unknown metric {other:?} (expected em or f1)"))),
        }
    }
}

/// One aggregate line. `hop == None` is the all-hops row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub dataset: String,
    pub retriever: String,
    pub pipeline: String,
    pub hop: Option<u8>,
    pub n: usize,
    pub em: f64,
    pub f1: f64,
    /// Empty contexts count as 0 here; see `precision_undefined`.
    pub precision: f64,
    pub recall: f64,
    pub flagged: usize,
    pub precision_undefined: usize,
}

impl ReportRow {
    pub fn flagged_pct(&self) -> f64 {
        100.0 * self.flagged as f64 / self.n as f64
    }

    fn from_outcomes<'a>(
        dataset: &str,
        retriever: &str,
        pipeline: &str,
        hop: Option<u8>,
        outcomes: impl Iterator<Item = &'a EvalOutcome>,
    ) -> Self {
        let mut row = ReportRow {
            dataset: dataset.into(),
            retriever: retriever.into(),
            pipeline: pipeline.into(),
            hop,
            n: 0,
            em: 0.0,
            f1: 0.0,
            precision: 0.0,
            recall: 0.0,
            flagged: 0,
            precision_undefined: 0,
        };
        for o in outcomes {
            row.n += 1;
            row.em += f64::from(o.em);
            row.f1 += o.f1;
            row.precision += o.precision.unwrap_or(0.0);
            row.precision_undefined += usize::from(o.precision.is_none());
            row.recall += o.recall;
            row.flagged += usize::from(o.flagged);
        }
        let n = row.n as f64;
        row.em /= n;
        row.f1 /= n;
        row.precision /= n;
        row.recall /= n;
        row
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Report {
    pub rows: Vec<ReportRow>,
}

impl Report {
    /// The all-hops row for a configuration.
    pub fn overall(&self, dataset: &str, retriever: &str, pipeline: &str) -> Option<&ReportRow> {
        self.rows
            .iter()
            .find(|r| r.hop.is_none() && r.dataset == dataset && r.retriever == retriever && r.pipeline == pipeline)
    }

    pub fn extend(&mut self, other: Report) {
        self.rows.extend(other.rows);
    }
}

/// Scores every record against its query.
pub fn score_records(records: &[RunRecord], queries: &[Query], mode: AnswerMode) -> Result<Vec<EvalOutcome>> {
    let by_id: HashMap<&str, &Query> = queries.iter().map(|q| (q.id.as_str(), q)).collect();
    records
        .iter()
        .map(|r| {
            let q = by_id
                .get(r.query_id.as_str())
                .ok_or_else(|| Error::UnknownQuery(r.query_id.clone()))?;
            Ok(evaluate_record(r, q, mode))
        })
        .collect()
}

pub fn aggregate(records: &[RunRecord], queries: &[Query]) -> Result<Report> {
    aggregate_with(records, queries, AnswerMode::default())
}

pub fn aggregate_with(records: &[RunRecord], queries: &[Query], mode: AnswerMode) -> Result<Report> {
    if records.is_empty() {
        return Err(Error::invalid("cannot aggregate an empty record set"));
    }
    let outcomes = score_records(records, queries, mode)?;
    Ok(aggregate_outcomes(records, &outcomes))
}

/// Aggregates records that already carry their [`EvalOutcome`].
pub fn aggregate_scored(records: &[RunRecord]) -> Result<Report> {
    if records.is_empty() {
        return Err(Error::invalid("cannot aggregate an empty record set"));
    }
    let outcomes = embedded_outcomes(records)?;
    Ok(aggregate_outcomes(records, &outcomes))
}

pub fn embedded_outcomes(records: &[RunRecord]) -> Result<Vec<EvalOutcome>> {
    records
        .iter()
        .map(|r| {
            r.eval
                .clone()
                .ok_or_else(|| Error::invalid(format!("record for query {} carries no scores", r.query_id)))
        })
        .collect()
}

/// One all-hops row per (dataset, retriever, pipeline) in first-seen order,
/// each followed by its per-hop rows in ascending hop order.
pub fn aggregate_outcomes(records: &[RunRecord], outcomes: &[EvalOutcome]) -> Report {
    type Key<'a> = (&'a str, &'a str, &'a str);
    let mut groups: Vec<(Key, Vec<&EvalOutcome>)> = Vec::new();
    for (r, o) in records.iter().zip(outcomes) {
        let key = (r.dataset.as_str(), r.retriever.as_str(), r.pipeline_label.as_str());
        match groups.iter_mut().find(|(k, _)| *k == key) {
            Some((_, v)) => v.push(o),
            None => groups.push((key, vec![o])),
        }
    }
    let mut rows = Vec::new();
    for ((d, r, p), os) in groups {
        rows.push(ReportRow::from_outcomes(d, r, p, None, os.iter().copied()));
        let mut by_hop: BTreeMap<u8, Vec<&EvalOutcome>> = BTreeMap::new();
        for o in &os {
            by_hop.entry(o.hops).or_default().push(o);
        }
        for (h, hs) in by_hop {
            rows.push(ReportRow::from_outcomes(d, r, p, Some(h), hs.into_iter()));
        }
    }
    Report { rows }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReportFormat {
    /// Aligned columns, four decimals.
    #[default]
    Table,
    /// Tab-separated with a header row, full precision.
    Tsv,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "table" | "text" => Ok(ReportFormat::Table),
            "tsv" | "delimited" => Ok(ReportFormat::Tsv),
            other => Err(Error::invalid(format!("unknown report format {other:?}"))),
        }
    }
}

pub const REPORT_COLUMNS: [&str; 11] = [
    "Dataset", "Retrieval", "Pipeline", "Hop", "N", "EM", "F1", "P", "R", "flagged%", "P_undef",
];

fn hop_cell(h: Option<u8>) -> String {
    h.map_or_else(|| "all".to_string(), |h| h.to_string())
}

pub fn emit_report(report: &Report, format: ReportFormat) -> String {
    match format {
        ReportFormat::Tsv => emit_tsv(report),
        ReportFormat::Table => emit_table(report),
    }
}

fn emit_tsv(report: &Report) -> String {
    let mut out = REPORT_COLUMNS.join("\t");
    out.push('\n');
    for r in &report.rows {
        let cells = [
            r.dataset.clone(),
            r.retriever.clone(),
            r.pipeline.clone(),
            hop_cell(r.hop),
            r.n.to_string(),
            r.em.to_string(),
            r.f1.to_string(),
            r.precision.to_string(),
            r.recall.to_string(),
            r.flagged_pct().to_string(),
            r.precision_undefined.to_string(),
        ];
        out.push_str(&cells.join("\t"));
        out.push('\n');
    }
    out
}

fn emit_table(report: &Report) -> String {
    let body: Vec<[String; 11]> = report
        .rows
        .iter()
        .map(|r| {
            [
                r.dataset.clone(),
                r.retriever.clone(),
                r.pipeline.clone(),
                hop_cell(r.hop),
                r.n.to_string(),
                format!("{:.4}", r.em),
                format!("{:.4}", r.f1),
                format!("{:.4}", r.precision),
                format!("{:.4}", r.recall),
                format!("{:.1}", r.flagged_pct()),
                r.precision_undefined.to_string(),
            ]
        })
        .collect();
    let mut widths: Vec<usize> = REPORT_COLUMNS.iter().map(|c| c.len()).collect();
    for row in &body {
        for (w, c) in widths.iter_mut().zip(row) {
            *w = (*w).max(c.chars().count());
        }
    }
    let mut out = String::new();
    let line = |out: &mut String, cells: &[&str]| {
        let parts: Vec<String> = cells
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(i, (c, w))| if i < 4 { format!("{c:<w$}") } else { format!("{c:>w$}") })
            .collect();
        let _ = writeln!(out, "{}", parts.join("  ").trim_end());
    };
    line(&mut out, &REPORT_COLUMNS);
    let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
    let rule: Vec<&str> = rule.iter().map(String::as_str).collect();
    line(&mut out, &rule);
    for row in &body {
        let cells: Vec<&str> = row.iter().map(String::as_str).collect();
        line(&mut out, &cells);
    }
    out
}

/// Inverse of the TSV rendering.
pub fn parse_tsv_report(text: &str) -> Result<Report> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::invalid("empty report"))?;
    if header.split('\t').collect::<Vec<_>>() != REPORT_COLUMNS {
        return Err(Error::invalid(format!("unexpected report header {header:?}")));
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate().filter(|(_, l)| !l.is_empty()) {
        let bad = |what: &str| Error::invalid(format!("report line {}: bad {what}", i + 2));
        let c: Vec<&str> = line.split('\t').collect();
        if c.len() != REPORT_COLUMNS.len() {
            return Err(bad("column count"));
        }
        let f = |j: usize| c[j].parse::<f64>().map_err(|_| bad(REPORT_COLUMNS[j]));
        let u = |j: usize| c[j].parse::<usize>().map_err(|_| bad(REPORT_COLUMNS[j]));
        let n = u(4)?;
        rows.push(ReportRow {
            dataset: c[0].into(),
            retriever: c[1].into(),
            pipeline: c[2].into(),
            hop: match c[3] {
                "all" => None,
                h => Some(h.parse().map_err(|_| bad("Hop"))?),
            },
            n,
            em: f(5)?,
            f1: f(6)?,
            precision: f(7)?,
            recall: f(8)?,
            flagged: (f(9)? * n as f64 / 100.0).round() as usize,
            precision_undefined: u(10)?,
        });
    }
    Ok(Report { rows })
}

/// Joins two record sets on query id and tests `metric` between them.
/// Returns the test and the number of ids present in only one of the sets.
pub fn compare_records(
    a: &[RunRecord],
    b: &[RunRecord],
    queries: &[Query],
    metric: Metric,
    mode: AnswerMode,
) -> Result<(TTestResult, usize)> {
    compare_outcomes(
        &score_records(a, queries, mode)?,
        &score_records(b, queries, mode)?,
        metric,
    )
}

/// As [`compare_records`], on already scored outcomes.
pub fn compare_outcomes(a: &[EvalOutcome], b: &[EvalOutcome], metric: Metric) -> Result<(TTestResult, usize)> {
    let mb: HashMap<&str, &EvalOutcome> = b.iter().map(|o| (o.query_id.as_str(), o)).collect();
    let mut xa = Vec::new();
    let mut xb = Vec::new();
    for o in a {
        if let Some(p) = mb.get(o.query_id.as_str()) {
            xa.push(metric.of(o));
            xb.push(metric.of(p));
        }
    }
    let unmatched = a.len() + b.len() - 2 * xa.len();
    Ok((paired_t_test(&xa, &xb)?, unmatched))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipelines::{Latencies, PipelineKind};

    fn query(id: &str, hops: u8) -> Query {
        Query {
            id: id.into(),
            text: "q".into(),
            hops,
            answers: vec!["Paris".into()],
            gold_ids: vec!["g".into()],
            candidate_ids: None,
            distractor_ids: vec![],
        }
    }

    fn record(id: &str, answer: &str, ctx: &[&str], flagged: bool) -> RunRecord {
        let kind = PipelineKind::Baseline { k_fixed: 5 };
        RunRecord {
            query_id: id.into(),
            dataset: "toy".into(),
            retriever: "BM25".into(),
            pipeline: kind,
            pipeline_label: kind.label(),
            k_used: ctx.len(),
            k_pred: None,
            context_ids: ctx.iter().map(|s| s.to_string()).collect(),
            answer: answer.into(),
            flagged,
            fallback: None,
            rerank_raw: None,
            latency: Latencies::default(),
            eval: None,
        }
    }

    fn sample() -> (Vec<RunRecord>, Vec<Query>) {
        (
            vec![
                record("a", "paris", &["g", "x"], false),
                record("b", "london", &[], true),
            ],
            vec![query("a", 2), query("b", 3)],
        )
    }

    #[test]
    fn aggregates_means_and_hops() {
        let (recs, qs) = sample();
        let rep = aggregate(&recs, &qs).unwrap();
        assert_eq!(rep.rows.len(), 3);
        let all = rep.overall("toy", "BM25", "baseline-k5").unwrap();
        assert_eq!(all.n, 2);
        assert_eq!(all.em, 0.5);
        assert_eq!(all.precision, 0.25);
        assert_eq!(all.recall, 0.5);
        assert_eq!(all.flagged_pct(), 50.0);
        assert_eq!(all.precision_undefined, 1);
        assert_eq!(rep.rows[1].hop, Some(2));
        assert_eq!(rep.rows[1].em, 1.0);
    }

    #[test]
    fn aggregate_errors() {
        let (recs, _) = sample();
        assert!(aggregate(&[], &[]).is_err());
        assert!(matches!(aggregate(&recs, &[query("a", 2)]), Err(Error::UnknownQuery(_))));
    }

    #[test]
    fn rendering_is_stable_and_round_trips() {
        let (recs, qs) = sample();
        let rep = aggregate(&recs, &qs).unwrap();
        let tsv = emit_report(&rep, ReportFormat::Tsv);
        assert_eq!(tsv, emit_report(&rep, ReportFormat::Tsv));
        assert_eq!(parse_tsv_report(&tsv).unwrap(), rep);
        let table = emit_report(&rep, ReportFormat::Table);
        assert!(table.starts_with("Dataset"));
        assert_eq!(table.lines().count(), 2 + rep.rows.len());

        let one = Report {
            rows: vec![rep.rows[0].clone()],
        };
        assert_eq!(emit_report(&one, ReportFormat::Tsv).lines().count(), 2);
    }

    #[test]
    fn round_trip_keeps_awkward_floats() {
        let mut row = aggregate(&sample().0, &sample().1).unwrap().rows[0].clone();
        row.f1 = 1.0 / 3.0;
        row.n = 7;
        row.flagged = 3;
        let rep = Report { rows: vec![row] };
        assert_eq!(parse_tsv_report(&emit_report(&rep, ReportFormat::Tsv)).unwrap(), rep);
    }

    #[test]
    fn compare_joins_on_query_id() {
        let qs = vec![query("a", 2), query("b", 2), query("c", 2)];
        let a = vec![record("a", "paris", &[], false), record("b", "paris", &[], false), record("c", "x", &[], false)];
        let b = vec![record("b", "x", &[], false), record("a", "x", &[], false)];
        let (t, unmatched) = compare_records(&a, &b, &qs, Metric::Em, AnswerMode::default()).unwrap();
        assert_eq!(t.n, 2);
        assert_eq!(unmatched, 1);
        assert!(t.degenerate);
    }
}
