//! Chat-completion client used by the reranker and generator roles.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::transport::{AuditLog, EndpointConfig, HttpTransport};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
    pub max_tokens: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: ResponseMessage,
}

#[derive(Deserialize)]
struct ResponseMessage {
    #[serde(default)]
    content: Option<String>,
}

/// `POST {base}/chat/completions`, temperature 0.
pub struct ChatClient {
    transport: HttpTransport,
    max_tokens: u32,
    seed: Option<u64>,
}

impl ChatClient {
    pub fn new(role: &str, config: EndpointConfig, max_tokens: u32, audit: Option<Arc<AuditLog>>) -> Result<Self> {
        Ok(ChatClient {
            transport: HttpTransport::new(role, config, audit)?,
            max_tokens,
            seed: None,
        })
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn request(&self, prompt: &str) -> ChatRequest {
        ChatRequest {
            model: self.transport.config().model.clone(),
            messages: vec![ChatMessage {
                role: "user".into(),
                content: prompt.to_string(),
            }],
            temperature: 0.0,
            max_tokens: self.max_tokens,
            seed: self.seed,
        }
    }

    /// The exact bytes sent for `prompt`.
    pub fn request_body(&self, prompt: &str) -> Result<String> {
        Ok(serde_json::to_string(&self.request(prompt))?)
    }

    /// Returns the trimmed content of the first choice.
    pub fn complete(&self, prompt: &str) -> Result<String> {
        let raw = self.transport.post("/chat/completions", &self.request_body(prompt)?)?;
        let resp: ChatResponse = serde_json::from_str(&raw).map_err(|e| self.bad_response(&raw, e))?;
        let content = resp
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| self.bad_response(&raw, "no choices"))?;
        Ok(content.trim().to_string())
    }

    fn bad_response(&self, raw: &str, e: impl std::fmt::Display) -> Error {
        Error::Endpoint {
            role: self.transport.role().to_string(),
            attempts: 1,
            message: format!("unparseable response {raw:?}: {e}"),
        }
    }
}

/// Wraps `content` in a minimal chat-completion response body; handy for
/// stub servers.
pub fn completion_body(content: &str) -> String {
    serde_json::json!({
        "choices": [{"index": 0, "message": {"role": "assistant", "content": content}, "finish_reason": "stop"}]
    })
    .to_string()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::stub::{StubResponse, StubServer};

    #[test]
    fn request_bytes_are_deterministic() {
        let cfg = EndpointConfig::new("http://127.0.0.1:1").with_model("flan-t5-xl");
        let a = ChatClient::new("generator", cfg.clone(), 32, None).unwrap().with_seed(7);
        let b = ChatClient::new("generator", cfg, 32, None).unwrap().with_seed(7);
        assert_eq!(a.request_body("hello").unwrap(), b.request_body("hello").unwrap());
        let v: serde_json::Value = serde_json::from_str(&a.request_body("hello").unwrap()).unwrap();
        assert_eq!(v["temperature"], 0.0);
        assert_eq!(v["seed"], 7);
        assert_eq!(v["messages"][0]["content"], "hello");
    }

    #[test]
    fn audit_logs_identical_requests() {
        let server = StubServer::start(|_| StubResponse::json(completion_body("  Paris \n")));
        let audit = Arc::new(AuditLog::in_memory());
        let c = ChatClient::new("generator", EndpointConfig::new(server.url()), 16, Some(audit.clone()))
            .unwrap()
            .with_seed(1);
        assert_eq!(c.complete("q").unwrap(), "Paris");
        assert_eq!(c.complete("q").unwrap(), "Paris");
        let reqs = server.requests();
        assert_eq!(reqs[0].body, reqs[1].body);
        assert_eq!(reqs[0].path, "/chat/completions");
        let lines = audit.lines();
        let r0: serde_json::Value = serde_json::from_str(&lines[0]).unwrap();
        let r1: serde_json::Value = serde_json::from_str(&lines[1]).unwrap();
        assert_eq!(r0["request"], r1["request"]);
        assert_eq!(r0["role"], "generator");
        assert!(r0["latency_ms"].is_u64());
    }

    #[test]
    fn malformed_completion_is_an_error() {
        let server = StubServer::start(|_| StubResponse::json("{\"choices\": []}"));
        let c = ChatClient::new("reranker", EndpointConfig::new(server.url()), 16, None).unwrap();
        assert!(matches!(c.complete("q"), Err(Error::Endpoint { .. })));
    }
}
