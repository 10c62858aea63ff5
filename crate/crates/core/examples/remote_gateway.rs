//! Remote classifier, reranker and generator clients against a loopback
//! stub server speaking the endpoint contracts.

use std::sync::Arc;

use ragkit::gateway::stub::{StubResponse, StubServer};
use ragkit::gateway::{
    build_rerank_prompt, completion_body, parse_rerank_response, AuditLog, ChatClient, EndpointConfig, Generator, HopClassifier, LabelMap, PromptTemplate,
    RemoteClassifier, RemoteGenerator, RerankModel,
};
use ragkit::synthetic::{musique_dataset, SyntheticSpec};

fn main() -> ragkit::Result<()> {
    let server = StubServer::start(|req| match req.path.as_str() {
        "/classify" => StubResponse::json(r#"{"label": "3hop", "confidence": 0.91}"#),
        "/chat/completions" if req.body.contains("Answer:") => StubResponse::json(completion_body("Hulo4")),
        "/chat/completions" => StubResponse::json(completion_body("Sure: [3, 1]")),
        _ => StubResponse::new(404, "not found"),
    });
    let log = Arc::new(AuditLog::in_memory());
    let audit = Some(log.clone());
    let cfg = EndpointConfig::new(server.url()).with_model("demo");

    let ds = musique_dataset(&SyntheticSpec::new(0, 1, 0, 5))?;
    let q = &ds.queries[0];

    let classifier = RemoteClassifier::new(cfg.clone(), LabelMap::default(), audit.clone())?;
    let pred = classifier.predict_k(q)?;
    println!("classifier: label={} k={}", pred.label, pred.k);

    let reranker = ChatClient::new("reranker", cfg.clone(), 64, audit.clone())?;
    let texts: Vec<String> =
        q.gold_ids.iter().map(|id| ds.corpus.require(id).map(|p| p.display_text())).collect::<ragkit::Result<_>>()?;
    let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
    let prompt = build_rerank_prompt(&q.text, pred.k.min(2), &refs)?;
    let raw = reranker.respond(q, &q.gold_ids, &prompt)?;
    println!("reranker reply: {raw} -> {:?}", parse_rerank_response(&raw, refs.len(), 2)?.ids);

    let generator = RemoteGenerator::new(ChatClient::new("generator", cfg, 32, audit.clone())?, PromptTemplate::default());
    let passages: Vec<_> = q.gold_ids.iter().map(|id| ds.corpus.require(id)).collect::<ragkit::Result<_>>()?;
    println!("generator reply: {}", generator.generate(q, &passages)?);

    println!("{} requests served; audit log:", server.requests().len());
    for line in log.lines() {
        println!("  {line}");
    }
    Ok(())
}
