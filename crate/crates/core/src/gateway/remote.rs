//! Remote pair scorer and query embedder.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::transport::{AuditLog, EndpointConfig, HttpTransport};
use crate::corpus::Query;
use crate::error::{Error, Result};
use crate::retrieval::{PairScorer, QueryEncoder, ScoreItem, ScoredItem};

#[derive(Serialize)]
struct ScoreRequest<'a> {
    query: &'a str,
    passages: &'a [ScoreItem],
}

#[derive(Deserialize)]
struct ScoreResponse {
    scores: Vec<ScoredItem>,
}

/// `POST {base}/score` with `{"query", "passages": [{"id", "text"}]}`,
/// expecting `{"scores": [{"id", "score"}]}`.
pub struct RemotePairScorer {
    transport: HttpTransport,
}

impl RemotePairScorer {
    pub fn new(config: EndpointConfig, audit: Option<Arc<AuditLog>>) -> Result<Self> {
        Ok(RemotePairScorer {
            transport: HttpTransport::new("scorer", config, audit)?,
        })
    }
}

impl PairScorer for RemotePairScorer {
    fn score(&self, query_text: &str, items: &[ScoreItem]) -> Result<Vec<ScoredItem>> {
        let body = serde_json::to_string(&ScoreRequest {
            query: query_text,
            passages: items,
        })?;
        let raw = self.transport.post("/score", &body)?;
        let resp: ScoreResponse = serde_json::from_str(&raw).map_err(|e| Error::Endpoint {
            role: "scorer".into(),
            attempts: 1,
            message: format!("unparseable response {raw:?}: {e}"),
        })?;
        Ok(resp.scores)
    }
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    model: &'a str,
    input: [&'a str; 1],
}

#[derive(Deserialize)]
struct EmbedResponse {
    data: Vec<EmbedDatum>,
}

#[derive(Deserialize)]
struct EmbedDatum {
    embedding: Vec<f32>,
}

/// `POST {base}/embeddings` in the common `{model, input}` →
/// `{data: [{embedding}]}` shape.
pub struct RemoteEmbedder {
    transport: HttpTransport,
}

impl RemoteEmbedder {
    pub fn new(config: EndpointConfig, audit: Option<Arc<AuditLog>>) -> Result<Self> {
        Ok(RemoteEmbedder {
            transport: HttpTransport::new("embedder", config, audit)?,
        })
    }
}

impl QueryEncoder for RemoteEmbedder {
    fn encode(&self, query: &Query) -> Result<Vec<f32>> {
        let body = serde_json::to_string(&EmbedRequest {
            model: &self.transport.config().model,
            input: [&query.text],
        })?;
        let raw = self.transport.post("/embeddings", &body)?;
        let bad = |m: String| Error::Endpoint {
            role: "embedder".into(),
            attempts: 1,
            message: m,
        };
        let resp: EmbedResponse =
            serde_json::from_str(&raw).map_err(|e| bad(format!("unparseable response {raw:?}: {e}")))?;
        resp.data
            .into_iter()
            .next()
            .map(|d| d.embedding)
            .ok_or_else(|| bad("empty embedding list".into()))
    }
}
