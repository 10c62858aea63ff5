//! The hop-classifier wire contract as an external server speaks it:
//! `POST /classify {"question"}` answered by `{"label", "confidence"}`.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use ragkit::gateway::stub::{StubResponse, StubServer};
use ragkit::gateway::{
    AuditLog, EndpointConfig, GoldAwareRanker, GoldEchoGenerator, HeuristicClassifier, HopClassifier, LabelMap, PredictionSource,
    RemoteClassifier,
};
use ragkit::pipelines::{run_classifier_k, run_queries, Components, PipelineKind};
use ragkit::retrieval::CandidateListRetriever;
use ragkit::synthetic::{musique_dataset, SyntheticSpec};
use serde_json::Value;

/// A stateless server that labels a question by its hop count, read from
/// the number of "partner of" phrases.
fn hop_server() -> StubServer {
    StubServer::start(|req| {
        if req.path != "/classify" {
            return StubResponse::new(404, "{}");
        }
        let v: Value = match serde_json::from_str(&req.body) {
            Ok(v) => v,
            Err(_) => return StubResponse::new(400, "{}"),
        };
        let Some(obj) = v.as_object().filter(|o| o.len() == 1) else {
            return StubResponse::new(400, r#"{"error": "expected {question}"}"#);
        };
        let q = obj["question"].as_str().unwrap_or_default();
        let label = q.matches("partner of").count().clamp(2, 4);
        StubResponse::json(format!(r#"{{"label": {label}, "confidence": 0.91}}"#))
    })
}

#[test]
fn remote_predictions_round_trip_with_matching_labels() {
    let server = hop_server();
    let ds = musique_dataset(&SyntheticSpec::new(3, 3, 3, 1)).unwrap();
    let c = RemoteClassifier::new(EndpointConfig::new(server.url()), LabelMap::default(), None).unwrap();
    for q in &ds.queries {
        let p = c.predict_k(q).unwrap();
        assert_eq!(p.label, q.hops, "{}", q.id);
        assert_eq!(p.k, usize::from(q.hops));
        assert_eq!(p.source, PredictionSource::Remote);
    }
    assert_eq!(server.requests().len(), ds.queries.len());
}

#[test]
fn request_body_is_exactly_the_question() {
    let server = hop_server();
    let ds = musique_dataset(&SyntheticSpec::new(1, 0, 0, 2)).unwrap();
    let c = RemoteClassifier::new(EndpointConfig::new(server.url()), LabelMap::default(), None).unwrap();
    c.predict_k(&ds.queries[0]).unwrap();
    let req = &server.requests()[0];
    assert_eq!(req.method, "POST");
    let body: Value = serde_json::from_str(&req.body).unwrap();
    assert_eq!(body, serde_json::json!({"question": ds.queries[0].text}));
}

#[test]
fn overrides_remap_remote_labels() {
    let server = hop_server();
    let ds = musique_dataset(&SyntheticSpec::new(0, 0, 1, 3)).unwrap();
    let labels = LabelMap::with_overrides(&BTreeMap::from([(4u8, 6usize)])).unwrap();
    let c = RemoteClassifier::new(EndpointConfig::new(server.url()), labels, None).unwrap();
    let p = c.predict_k(&ds.queries[0]).unwrap();
    assert_eq!((p.label, p.k), (4, 6));
}

#[test]
fn transient_failures_are_retried_and_audited() {
    let calls = Arc::new(AtomicUsize::new(0));
    let seen = calls.clone();
    let server = StubServer::start(move |_| {
        if seen.fetch_add(1, Ordering::SeqCst) < 2 {
            StubResponse::new(503, "busy")
        } else {
            StubResponse::json(r#"{"label": "3hop", "confidence": 0.5}"#)
        }
    });
    let mut cfg = EndpointConfig::new(server.url());
    cfg.backoff_ms = 1;
    let audit = Arc::new(AuditLog::in_memory());
    let c = RemoteClassifier::new(cfg, LabelMap::default(), Some(audit.clone())).unwrap();
    let ds = musique_dataset(&SyntheticSpec::new(1, 0, 0, 4)).unwrap();
    assert_eq!(c.predict_k(&ds.queries[0]).unwrap().label, 3);
    assert_eq!(calls.load(Ordering::SeqCst), 3);
    assert_eq!(audit.lines().len(), 3);
}

#[test]
fn identical_requests_get_identical_labels() {
    let server = hop_server();
    let ds = musique_dataset(&SyntheticSpec::new(2, 2, 2, 5)).unwrap();
    let c = RemoteClassifier::new(EndpointConfig::new(server.url()), LabelMap::default(), None).unwrap();
    let first: Vec<u8> = ds.queries.iter().map(|q| c.predict_k(q).unwrap().label).collect();
    let second: Vec<u8> = ds.queries.iter().map(|q| c.predict_k(q).unwrap().label).collect();
    assert_eq!(first, second);
}

#[test]
fn bad_label_aborts_the_classify_stage() {
    let server = StubServer::start(|_| StubResponse::json(r#"{"label": "9hop", "confidence": 0.2}"#));
    let ds = musique_dataset(&SyntheticSpec::new(1, 0, 0, 6)).unwrap();
    let c = RemoteClassifier::new(EndpointConfig::new(server.url()), LabelMap::default(), None).unwrap();
    let q = &ds.queries[0];
    let mut q = q.clone();
    q.candidate_ids = Some(q.gold_ids.clone());
    let err = run_classifier_k(&q, &ds.corpus, &c, &CandidateListRetriever, &GoldEchoGenerator).unwrap_err();
    assert_eq!(err.stage(), Some("classify"));
    assert_eq!(err.kind(), "bad-label");
}

#[test]
fn remote_and_heuristic_classifiers_drive_the_same_pipeline() {
    let server = hop_server();
    let ds = musique_dataset(&SyntheticSpec::new(4, 4, 4, 7)).unwrap();
    let queries: Vec<_> = ds
        .queries
        .iter()
        .map(|q| {
            let mut q = q.clone();
            let mut cands = q.gold_ids.clone();
            cands.extend(q.distractor_ids.iter().take(5).cloned());
            q.candidate_ids = Some(cands);
            q
        })
        .collect();
    let remote = RemoteClassifier::new(EndpointConfig::new(server.url()), LabelMap::default(), None).unwrap();
    let heuristic = HeuristicClassifier::default();
    for classifier in [&remote as &dyn HopClassifier, &heuristic] {
        let c = Components {
            dataset: "synthetic",
            corpus: &ds.corpus,
            retriever: &CandidateListRetriever,
            classifier,
            reranker: &GoldAwareRanker,
            generator: &GoldEchoGenerator,
            seed: 0,
        };
        let out = run_queries(PipelineKind::ClassifierK, &queries, &c);
        assert!(out.iter().all(|r| r.is_ok()));
    }
    let c = Components {
        dataset: "synthetic",
        corpus: &ds.corpus,
        retriever: &CandidateListRetriever,
        classifier: &remote,
        reranker: &GoldAwareRanker,
        generator: &GoldEchoGenerator,
        seed: 0,
    };
    for (q, r) in queries.iter().zip(run_queries(PipelineKind::ClassifierK, &queries, &c)) {
        let r = r.unwrap();
        assert_eq!(r.k_pred, Some(usize::from(q.hops)));
        assert_eq!(r.context_ids, q.gold_ids);
    }
}
