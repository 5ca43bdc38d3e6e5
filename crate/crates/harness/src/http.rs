//! JSON-over-HTTP backend.
//!
//! | route            | request                                              | response                  |
//! |------------------|------------------------------------------------------|---------------------------|
//! | `POST /score`    | `{context, continuation}`                            | `{log_likelihood}`        |
//! | `POST /complete` | `{prompt, allowed, max_tokens: 1, temperature: 0}`   | `{text}`                  |
//! | `POST /complete` | `{prompt, max_tokens, temperature, seed}`            | `{text}`                  |
//! | `POST /predict`  | `{profile_id, text}`                                 | `{scores: {EXT, ..., OPE}}` |
//!
//! Every request carries `Idempotency-Key`, and `Authorization: Bearer ...`
//! when the descriptor names an auth variable.

use std::time::Duration;

use serde_json::{json, Value};
use synthpersona_core::Domain;

use crate::gateway::{Backend, BackendDescriptor, CallError, ChoiceQuery, GatewayError, GenerationRequest};

#[derive(Debug)]
pub struct HttpBackend {
    endpoint: String,
    auth_env: Option<String>,
    agent: ureq::Agent,
}

impl HttpBackend {
    pub fn new(descriptor: &BackendDescriptor) -> Result<Self, GatewayError> {
        let endpoint = descriptor
            .endpoint
            .as_deref()
            .ok_or_else(|| GatewayError::Config(format!("backend {} has no endpoint", descriptor.id)))?
            .trim_end_matches('/')
            .to_string();
        if let Some(var) = &descriptor.auth_env {
            if std::env::var_os(var).is_none() {
                return Err(GatewayError::Config(format!("auth variable {var} is not set")));
            }
        }
        let agent = ureq::AgentBuilder::new().timeout(Duration::from_millis(descriptor.retry.timeout_ms)).build();
        Ok(Self { endpoint, auth_env: descriptor.auth_env.clone(), agent })
    }

    fn post(&self, route: &str, key: &str, body: &Value) -> Result<Value, CallError> {
        let url = format!("{}/{route}", self.endpoint);
        log::debug!("POST {url} key={key} body={}", redact(body));
        let mut req = self.agent.post(&url).set("Idempotency-Key", key);
        if let Some(var) = &self.auth_env {
            let token = std::env::var(var).map_err(|_| CallError::Fatal(format!("auth variable {var} is not set")))?;
            req = req.set("Authorization", &format!("Bearer {token}"));
        }
        match req.send_json(body) {
            Ok(resp) => {
                let v: Value = resp.into_json().map_err(|e| CallError::Transient(format!("unreadable body: {e}")))?;
                log::debug!("{url} -> {}", redact(&v));
                Ok(v)
            }
            Err(ureq::Error::Status(code, resp)) => {
                let text = resp.into_string().unwrap_or_default();
                log::debug!("{url} -> {code} ({} bytes)", text.len());
                if code == 429 || code >= 500 {
                    Err(CallError::Transient(format!("status {code}")))
                } else {
                    Err(CallError::Fatal(format!("status {code}")))
                }
            }
            Err(ureq::Error::Transport(t)) => {
                if t.kind() == ureq::ErrorKind::Io && t.to_string().contains("timed out") {
                    Err(CallError::Timeout)
                } else {
                    Err(CallError::Transient(t.to_string()))
                }
            }
        }
    }
}

/// Body summary for debug logs: string values are replaced by their length.
fn redact(v: &Value) -> Value {
    match v {
        Value::String(s) => Value::String(format!("<{} chars>", s.chars().count())),
        Value::Array(a) => Value::Array(a.iter().map(redact).collect()),
        Value::Object(o) => Value::Object(o.iter().map(|(k, v)| (k.clone(), redact(v))).collect()),
        other => other.clone(),
    }
}

fn field<'v>(v: &'v Value, name: &str) -> Result<&'v Value, CallError> {
    v.get(name).ok_or_else(|| CallError::Fatal(format!("response lacks `{name}`")))
}

impl Backend for HttpBackend {
    fn score_options(&self, query: &ChoiceQuery, continuations: &[String], key: &str) -> Result<Vec<f64>, CallError> {
        continuations
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let body = json!({ "context": query.prompt, "continuation": c });
                let v = self.post("score", &format!("{key}#{i}"), &body)?;
                field(&v, "log_likelihood")?.as_f64().ok_or_else(|| CallError::Fatal("log_likelihood is not a number".into()))
            })
            .collect()
    }

    fn constrained_choice(&self, query: &ChoiceQuery, continuations: &[String], key: &str) -> Result<String, CallError> {
        let body = json!({ "prompt": query.prompt, "allowed": continuations, "max_tokens": 1, "temperature": 0 });
        let v = self.post("complete", key, &body)?;
        Ok(field(&v, "text")?.as_str().unwrap_or_default().to_string())
    }

    fn generate(&self, request: &GenerationRequest, key: &str) -> Result<String, CallError> {
        let body = json!({
            "prompt": request.prompt,
            "max_tokens": request.max_tokens,
            "temperature": request.temperature,
            "seed": request.seed,
        });
        let v = self.post("complete", key, &body)?;
        Ok(field(&v, "text")?.as_str().unwrap_or_default().to_string())
    }

    fn predict(&self, profile_id: &str, text: &str, key: &str) -> Result<[f64; 5], CallError> {
        let v = self.post("predict", key, &json!({ "profile_id": profile_id, "text": text }))?;
        let scores = field(&v, "scores")?;
        let mut out = [0.0; 5];
        for d in Domain::ALL {
            out[d.index()] = scores
                .get(d.code())
                .and_then(Value::as_f64)
                .ok_or_else(|| CallError::Fatal(format!("prediction lacks {}", d.code())))?;
        }
        Ok(out)
    }
}
