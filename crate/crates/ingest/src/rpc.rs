//! JSON-RPC transports.

use std::collections::HashMap;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::IngestError;

/// Where and how hard to query a node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeEndpoint {
    pub url: String,
    pub max_concurrent_requests: usize,
    pub request_timeout: Duration,
    /// Extra attempts after a transport failure. All methods used are reads.
    pub retries: u32,
}

impl NodeEndpoint {
    pub fn new(
        url: impl Into<String>,
        max_concurrent_requests: usize,
        request_timeout: Duration,
    ) -> Result<Self, IngestError> {
        let url = url.into();
        if !(url.starts_with("http://") || url.starts_with("https://")) {
            return Err(IngestError::Config(format!("RPC URL must be http(s): `{url}`")));
        }
        if max_concurrent_requests == 0 {
            return Err(IngestError::Config("max_concurrent_requests must be at least 1".into()));
        }
        if request_timeout.is_zero() {
            return Err(IngestError::Config("request timeout must be positive".into()));
        }
        Ok(Self {
            url,
            max_concurrent_requests,
            request_timeout,
            retries: 2,
        })
    }
}

pub trait Transport: Send + Sync {
    /// Performs one call and returns its `result` member. A JSON-RPC error
    /// object becomes [`IngestError::RpcResponse`].
    fn call(&self, method: &str, params: Value) -> Result<Value, IngestError>;
}

impl<T: Transport + ?Sized> Transport for Box<T> {
    fn call(&self, method: &str, params: Value) -> Result<Value, IngestError> {
        (**self).call(method, params)
    }
}

/// JSON-RPC 2.0 over HTTP POST.
pub struct HttpTransport {
    agent: ureq::Agent,
    url: String,
    retries: u32,
    next_id: AtomicU64,
}

impl HttpTransport {
    pub fn new(endpoint: &NodeEndpoint) -> Self {
        let config = ureq::Agent::config_builder()
            .timeout_global(Some(endpoint.request_timeout))
            .build();
        Self {
            agent: ureq::Agent::new_with_config(config),
            url: endpoint.url.clone(),
            retries: endpoint.retries,
            next_id: AtomicU64::new(1),
        }
    }

    fn post(&self, body: &Value) -> Result<Value, IngestError> {
        let mut response = self
            .agent
            .post(&self.url)
            .send_json(body)
            .map_err(|e| IngestError::Rpc(e.to_string()))?;
        response
            .body_mut()
            .read_json::<Value>()
            .map_err(|e| IngestError::Rpc(e.to_string()))
    }
}

impl Transport for HttpTransport {
    fn call(&self, method: &str, params: Value) -> Result<Value, IngestError> {
        let id = self.next_id.fetch_add(1, Ordering::Relaxed);
        let body = json!({"jsonrpc": "2.0", "id": id, "method": method, "params": params});
        let mut attempt = 0;
        let envelope = loop {
            match self.post(&body) {
                Ok(v) => break v,
                Err(e) if attempt < self.retries => {
                    log::warn!("{method}: {e}; retrying");
                    attempt += 1;
                    std::thread::sleep(Duration::from_millis(100 << attempt.min(5)));
                }
                Err(e) => return Err(e),
            }
        };
        unwrap_envelope(envelope)
    }
}

fn unwrap_envelope(mut envelope: Value) -> Result<Value, IngestError> {
    if let Some(err) = envelope.get("error").filter(|e| !e.is_null()) {
        return Err(IngestError::RpcResponse {
            code: err.get("code").and_then(Value::as_i64).unwrap_or(0),
            message: err.get("message").and_then(Value::as_str).unwrap_or("").to_string(),
        });
    }
    match envelope.get_mut("result") {
        Some(v) => Ok(v.take()),
        None => Err(IngestError::Schema(
            "JSON-RPC response without `result` or `error`".into(),
        )),
    }
}

/// One recorded exchange.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Recording {
    pub method: String,
    pub params: Value,
    #[serde(default)]
    pub result: Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<Value>,
}

/// Replays recorded exchanges, matched on method and exact params.
/// Unrecorded calls fail with a `-32601` response error.
#[derive(Debug, Default)]
pub struct RecordedTransport {
    responses: HashMap<(String, String), Value>,
}

impl RecordedTransport {
    pub fn new(recordings: impl IntoIterator<Item = Recording>) -> Self {
        let responses = recordings
            .into_iter()
            .map(|r| {
                let envelope = match r.error {
                    Some(e) => json!({"error": e}),
                    None => json!({"result": r.result}),
                };
                ((r.method, r.params.to_string()), envelope)
            })
            .collect();
        Self { responses }
    }

    /// Loads a JSON array of [`Recording`]s.
    pub fn from_file(path: &Path) -> Result<Self, IngestError> {
        let text = std::fs::read_to_string(path).map_err(|e| IngestError::Rpc(format!("{}: {e}", path.display())))?;
        let recordings: Vec<Recording> = serde_json::from_str(&text).map_err(|e| IngestError::Schema(e.to_string()))?;
        Ok(Self::new(recordings))
    }
}

impl Transport for RecordedTransport {
    fn call(&self, method: &str, params: Value) -> Result<Value, IngestError> {
        match self.responses.get(&(method.to_string(), params.to_string())) {
            Some(envelope) => unwrap_envelope(envelope.clone()),
            None => Err(IngestError::RpcResponse {
                code: -32601,
                message: format!("no recording for {method} {params}"),
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn endpoint_validation() {
        let t = Duration::from_secs(5);
        assert!(NodeEndpoint::new("http://localhost:8545", 4, t).is_ok());
        assert!(NodeEndpoint::new("localhost:8545", 4, t).is_err());
        assert!(NodeEndpoint::new("http://x", 0, t).is_err());
        assert!(NodeEndpoint::new("http://x", 1, Duration::ZERO).is_err());
    }

    #[test]
    fn envelope_errors() {
        let err = unwrap_envelope(json!({"error": {"code": -32000, "message": "boom"}})).unwrap_err();
        assert!(matches!(err, IngestError::RpcResponse { code: -32000, .. }));
        assert_eq!(
            unwrap_envelope(json!({"result": null, "error": null})).unwrap(),
            Value::Null
        );
        assert!(matches!(unwrap_envelope(json!({})), Err(IngestError::Schema(_))));
    }

    #[test]
    fn recorded_transport_matches_params_exactly() {
        let t = RecordedTransport::new(vec![Recording {
            method: "eth_blockNumber".into(),
            params: json!([]),
            result: json!("0x10"),
            error: None,
        }]);
        assert_eq!(t.call("eth_blockNumber", json!([])).unwrap(), json!("0x10"));
        assert!(matches!(
            t.call("eth_blockNumber", json!([1])),
            Err(IngestError::RpcResponse { code: -32601, .. })
        ));
    }
}
