//! Hop-count classification and the label → k mapping.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::transport::{AuditLog, EndpointConfig, HttpTransport};
use crate::corpus::{Query, MAX_HOPS, MIN_HOPS};
use crate::error::{Error, Result};
use crate::retrieval::tokenize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PredictionSource {
    Oracle,
    Remote,
    Heuristic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HopPrediction {
    pub label: u8,
    pub k: usize,
    pub source: PredictionSource,
}

/// Hop class → retrieval depth. Identity unless overridden.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelMap(BTreeMap<u8, usize>);

impl Default for LabelMap {
    fn default() -> Self {
        LabelMap((MIN_HOPS..=MAX_HOPS).map(|h| (h, usize::from(h))).collect())
    }
}

impl LabelMap {
    pub fn with_overrides(overrides: &BTreeMap<u8, usize>) -> Result<Self> {
        let mut map = Self::default();
        for (&label, &k) in overrides {
            if !map.0.contains_key(&label) {
                return Err(Error::invalid(format!("label map override for unknown label {label}")));
            }
            if k == 0 {
                return Err(Error::invalid(format!("label {label} mapped to k = 0")));
            }
            map.0.insert(label, k);
        }
        Ok(map)
    }

    pub fn map_label_to_k(&self, label: u8) -> Result<usize> {
        self.0
            .get(&label)
            .copied()
            .ok_or_else(|| Error::invalid(format!("unknown hop label {label}")))
    }

    fn predict(&self, label: u8, source: PredictionSource) -> Result<HopPrediction> {
        Ok(HopPrediction {
            label,
            k: self.map_label_to_k(label)?,
            source,
        })
    }
}

pub trait HopClassifier: Send + Sync {
    fn predict_k(&self, query: &Query) -> Result<HopPrediction>;
}

/// Returns the gold hop count.
#[derive(Debug, Clone, Default)]
pub struct OracleClassifier {
    pub labels: LabelMap,
}

impl HopClassifier for OracleClassifier {
    fn predict_k(&self, query: &Query) -> Result<HopPrediction> {
        self.labels.predict(query.hops, PredictionSource::Oracle)
    }
}

const CUE_TOKENS: &[&str] = &[
    "who", "whom", "whose", "what", "which", "when", "where", "how", "of", "and", "that", "by",
];

/// Offline fallback: counts interrogative and relational cue tokens.
/// Deterministic; no accuracy is claimed.
#[derive(Debug, Clone, Default)]
pub struct HeuristicClassifier {
    pub labels: LabelMap,
}

impl HeuristicClassifier {
    pub fn label_for(text: &str) -> u8 {
        let cues = tokenize(text)
            .iter()
            .filter(|t| CUE_TOKENS.contains(&t.as_str()))
            .count();
        match cues {
            0..=3 => 2,
            4..=5 => 3,
            _ => 4,
        }
    }
}

impl HopClassifier for HeuristicClassifier {
    fn predict_k(&self, query: &Query) -> Result<HopPrediction> {
        self.labels.predict(Self::label_for(&query.text), PredictionSource::Heuristic)
    }
}

#[derive(Serialize)]
struct ClassifyRequest<'a> {
    question: &'a str,
}

#[derive(Deserialize)]
struct ClassifyResponse {
    label: serde_json::Value,
    #[serde(default)]
    #[allow(dead_code)]
    confidence: Option<f64>,
}

/// `POST {base}/classify` with `{"question": ...}`, expecting
/// `{"label": 2 | "2hop", "confidence": ...}`.
pub struct RemoteClassifier {
    transport: HttpTransport,
    labels: LabelMap,
}

impl RemoteClassifier {
    pub fn new(config: EndpointConfig, labels: LabelMap, audit: Option<Arc<AuditLog>>) -> Result<Self> {
        Ok(RemoteClassifier {
            transport: HttpTransport::new("classifier", config, audit)?,
            labels,
        })
    }
}

/// Accepts `2`, `"2"`, `"2hop"` and `"2-hop"`.
pub fn parse_label(value: &serde_json::Value) -> Result<u8> {
    let text = match value {
        serde_json::Value::String(s) => s.trim().to_string(),
        other => other.to_string(),
    };
    let digits: String = text.chars().take_while(char::is_ascii_digit).collect();
    let rest = text[digits.len()..].trim_start_matches(['-', '_', ' ']);
    let label: Option<u8> = digits.parse().ok();
    match label {
        Some(l) if (MIN_HOPS..=MAX_HOPS).contains(&l) && (rest.is_empty() || rest.eq_ignore_ascii_case("hop")) => Ok(l),
        _ => Err(Error::BadLabel(text)),
    }
}

impl HopClassifier for RemoteClassifier {
    fn predict_k(&self, query: &Query) -> Result<HopPrediction> {
        let body = serde_json::to_string(&ClassifyRequest { question: &query.text })?;
        let raw = self.transport.post("/classify", &body)?;
        let resp: ClassifyResponse = serde_json::from_str(&raw).map_err(|e| Error::Endpoint {
            role: "classifier".into(),
            attempts: 1,
            message: format!("unparseable response {raw:?}: {e}"),
        })?;
        let label = parse_label(&resp.label)?;
        self.labels.predict(label, PredictionSource::Remote)
    }
}
