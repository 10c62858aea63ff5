//! Clients for the three model roles (hop classifier, listwise reranker,
//! answer generator) plus the remote pair scorer and query embedder.
//!
//! Every role has a remote implementation speaking JSON over HTTP and one or
//! more deterministic local implementations so that complete pipelines run
//! with no model server.
//!
//! | role       | path                 | request                          | response                     |
//! |------------|----------------------|----------------------------------|------------------------------|
//! | classifier | `/classify`          | `{question}`                     | `{label, confidence}`        |
//! | reranker   | `/chat/completions`  | `{model, messages, temperature}` | `{choices[0].message}`       |
//! | generator  | `/chat/completions`  | same                             | same                         |
//! | scorer     | `/score`             | `{query, passages: [{id,text}]}` | `{scores: [{id, score}]}`    |
//! | embedder   | `/embeddings`        | `{model, input: [text]}`         | `{data: [{embedding}]}`      |

mod chat;
mod classifier;
mod generate;
mod remote;
mod rerank;
pub mod stub;
mod transport;

pub use chat::{completion_body, ChatClient, ChatMessage, ChatRequest};
pub use classifier::{
    parse_label, HeuristicClassifier, HopClassifier, HopPrediction, LabelMap, OracleClassifier, PredictionSource,
    RemoteClassifier,
};
pub use generate::{
    GoldEchoGenerator, Generator, PositionSensitiveGenerator, PromptTemplate, RemoteGenerator,
    DEFAULT_GENERATION_TEMPLATE,
};
pub use remote::{RemoteEmbedder, RemotePairScorer};
pub use rerank::{
    build_control_prompt, build_rerank_prompt, first_id_list, format_id_list, parse_free_selection,
    parse_rerank_response, EchoRanker, FaultInjectingRanker, FixedReplyRanker, GoldAwareRanker, RerankModel,
    RerankSelection, CONTROL_INSTRUCTION, RERANK_INSTRUCTION,
};
pub use transport::{AuditLog, EndpointConfig, HttpTransport, InFlightLimiter};

/// Environment variables that override endpoint base addresses.
pub const ENV_GENERATOR_URL: &str = "RAGKIT_GEN_URL";
pub const ENV_CLASSIFIER_URL: &str = "RAGKIT_CLS_URL";
pub const ENV_RERANKER_URL: &str = "RAGKIT_RERANK_URL";
pub const ENV_SCORER_URL: &str = "RAGKIT_SCORER_URL";
pub const ENV_EMBEDDER_URL: &str = "RAGKIT_EMBED_URL";
