//! Client for a remote similarity service.
//!
//! `POST {endpoint}/similarity` with a JSON body carrying the instance as
//! base64 of little-endian f64 values plus the concept label text; the
//! service answers `{"confidence": x}` with `x ∈ [0, 1]`.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Condvar, Mutex};
use std::time::Duration;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::{Deserialize, Serialize};

use super::{check_range, Oracle, PromptRecord};
use crate::error::{Error, OracleError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HttpOracleConfig {
    /// Base URL, e.g. `http://127.0.0.1:8080`.
    pub endpoint: String,
    pub timeout_ms: u64,
    /// Retries after the first attempt.
    pub retries: u32,
    /// First backoff delay; doubles on each retry.
    pub backoff_ms: u64,
    pub max_in_flight: usize,
}

impl Default for HttpOracleConfig {
    fn default() -> Self {
        Self { endpoint: String::new(), timeout_ms: 10_000, retries: 3, backoff_ms: 100, max_in_flight: 4 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimilarityRequest {
    pub request_id: u64,
    pub instance_id: u64,
    pub tensor_b64: String,
    pub shape: Vec<usize>,
    pub concept_text: String,
}

impl SimilarityRequest {
    pub fn decode_tensor(&self) -> Option<Vec<f64>> {
        let raw = STANDARD.decode(&self.tensor_b64).ok()?;
        if raw.len() % 8 != 0 {
            return None;
        }
        Some(raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimilarityResponse {
    pub confidence: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub request_id: Option<u64>,
}

struct Gate {
    free: Mutex<usize>,
    cv: Condvar,
}

impl Gate {
    fn acquire(&self) {
        let mut free = self.free.lock().unwrap();
        while *free == 0 {
            free = self.cv.wait(free).unwrap();
        }
        *free -= 1;
    }

    fn release(&self) {
        *self.free.lock().unwrap() += 1;
        self.cv.notify_one();
    }
}

pub struct HttpOracle {
    cfg: HttpOracleConfig,
    class_names: Vec<String>,
    agent: ureq::Agent,
    gate: Gate,
    next_request: AtomicU64,
    records: Mutex<Vec<PromptRecord>>,
}

enum Attempt {
    Retry(String),
    Fatal(String),
}

impl HttpOracle {
    pub fn new(cfg: HttpOracleConfig, class_names: Vec<String>) -> Result<Self> {
        if cfg.endpoint.is_empty() {
            return Err(Error::Config("http oracle needs an endpoint".into()));
        }
        if cfg.max_in_flight == 0 || cfg.timeout_ms == 0 {
            return Err(Error::Config("max_in_flight and timeout_ms must be >= 1".into()));
        }
        let agent = ureq::AgentBuilder::new().timeout(Duration::from_millis(cfg.timeout_ms)).build();
        let gate = Gate { free: Mutex::new(cfg.max_in_flight), cv: Condvar::new() };
        Ok(Self { cfg, class_names, agent, gate, next_request: AtomicU64::new(0), records: Mutex::new(Vec::new()) })
    }

    /// Successful answers so far, in completion order.
    pub fn records(&self) -> Vec<PromptRecord> {
        self.records.lock().unwrap().clone()
    }

    fn url(&self) -> String {
        format!("{}/similarity", self.cfg.endpoint.trim_end_matches('/'))
    }

    fn attempt(&self, req: &SimilarityRequest) -> std::result::Result<f64, Attempt> {
        let resp = match self.agent.post(&self.url()).send_json(req) {
            Ok(r) => r,
            Err(ureq::Error::Status(code, _)) if code >= 500 || code == 429 => {
                return Err(Attempt::Retry(format!("HTTP {code}")))
            }
            Err(ureq::Error::Status(code, _)) => return Err(Attempt::Fatal(format!("HTTP {code}"))),
            Err(ureq::Error::Transport(t)) => return Err(Attempt::Retry(t.to_string())),
        };
        let body = resp.into_string().map_err(|e| Attempt::Retry(format!("reading body: {e}")))?;
        let parsed: SimilarityResponse =
            serde_json::from_str(&body).map_err(|e| Attempt::Fatal(format!("malformed response {body:?}: {e}")))?;
        if let Some(id) = parsed.request_id {
            if id != req.request_id {
                return Err(Attempt::Fatal(format!("response for request {id}, expected {}", req.request_id)));
            }
        }
        if !(0.0..=1.0).contains(&parsed.confidence) {
            return Err(Attempt::Fatal(format!("confidence {} outside [0, 1]", parsed.confidence)));
        }
        Ok(parsed.confidence)
    }
}

impl Oracle for HttpOracle {
    fn query(&self, instance: &[f64], instance_id: u64, concept: usize) -> Result<f64, OracleError> {
        let classes = self.class_names.len();
        let concept_text = self.class_names.get(concept).ok_or(OracleError::Concept { concept, classes })?.clone();
        let mut raw = Vec::with_capacity(instance.len() * 8);
        for v in instance {
            raw.extend_from_slice(&v.to_le_bytes());
        }
        let req = SimilarityRequest {
            request_id: self.next_request.fetch_add(1, Ordering::Relaxed),
            instance_id,
            tensor_b64: STANDARD.encode(raw),
            shape: vec![instance.len()],
            concept_text,
        };
        self.gate.acquire();
        let mut attempts = 0;
        let outcome = loop {
            attempts += 1;
            match self.attempt(&req) {
                Ok(v) => break Ok(v),
                Err(Attempt::Fatal(message)) => break Err(OracleError::Transport { attempts, message }),
                Err(Attempt::Retry(message)) => {
                    if attempts > self.cfg.retries {
                        break Err(OracleError::Transport { attempts, message });
                    }
                    let delay = self.cfg.backoff_ms.saturating_mul(1 << (attempts - 1).min(16));
                    std::thread::sleep(Duration::from_millis(delay));
                }
            }
        };
        self.gate.release();
        let value = check_range(outcome?)?;
        self.records.lock().unwrap().push(PromptRecord {
            query_image_id: instance_id,
            concept,
            concept_label_text: req.concept_text,
            answer_confidence: value,
        });
        Ok(value)
    }

    fn kind(&self) -> &str {
        "http"
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn request_tensor_round_trips() {
        let v = [0.1, -2.5, f64::MAX];
        let mut raw = Vec::new();
        for x in v {
            raw.extend_from_slice(&x.to_le_bytes());
        }
        let req = SimilarityRequest {
            request_id: 0,
            instance_id: 1,
            tensor_b64: STANDARD.encode(raw),
            shape: vec![3],
            concept_text: "c".into(),
        };
        assert_eq!(req.decode_tensor().unwrap(), v);
    }

    #[test]
    fn confidence_must_be_a_number() {
        assert!(serde_json::from_str::<SimilarityResponse>(r#"{"confidence": "high"}"#).is_err());
        assert_eq!(serde_json::from_str::<SimilarityResponse>(r#"{"confidence": 0.0}"#).unwrap().confidence, 0.0);
    }

    #[test]
    fn empty_endpoint_rejected() {
        assert!(HttpOracle::new(HttpOracleConfig::default(), vec!["a".into()]).is_err());
    }
}
