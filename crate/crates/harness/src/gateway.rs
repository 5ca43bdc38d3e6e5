//! Administers one prompt to a backend: option ranking for surveys, free
//! generation for the status-update study, and text-personality prediction.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use synthpersona_core::Domain;

use crate::mock::MockBackend;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BackendKind {
    ScoreOptions,
    ConstrainedGenerate,
    #[default]
    Mock,
}

/// How an option is written as a continuation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OptionStyle {
    /// `"5"`
    #[default]
    BareDigit,
    /// `"5 = very accurate"`
    DigitLabel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_delay_ms: u64,
    pub max_delay_ms: u64,
    pub timeout_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self { max_attempts: 5, base_delay_ms: 250, max_delay_ms: 8_000, timeout_ms: 60_000 }
    }
}

impl RetryPolicy {
    /// Delay before retry number `attempt` (0-based): `base · 2^attempt`, capped.
    pub fn backoff(&self, attempt: u32) -> Duration {
        let ms = self.base_delay_ms.saturating_mul(1u64 << attempt.min(30));
        Duration::from_millis(ms.min(self.max_delay_ms))
    }
}

/// Where and how to reach a backend. `auth_env` names the environment
/// variable holding the credential; the value is read per request and never
/// stored or logged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BackendDescriptor {
    pub id: String,
    pub kind: BackendKind,
    pub endpoint: Option<String>,
    pub auth_env: Option<String>,
    pub retry: RetryPolicy,
    /// Requests per second across all workers; unlimited when absent.
    pub rate_limit: Option<f64>,
    pub option_style: OptionStyle,
}

impl Default for BackendDescriptor {
    fn default() -> Self {
        Self {
            id: "mock".into(),
            kind: BackendKind::Mock,
            endpoint: None,
            auth_env: None,
            retry: RetryPolicy::default(),
            rate_limit: None,
            option_style: OptionStyle::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChoiceQuery {
    pub prompt: String,
    /// Option values in ascending order, e.g. `"1"..="5"`.
    pub options: Vec<String>,
    /// Anchor label per option; only needed for [`OptionStyle::DigitLabel`].
    pub labels: Vec<String>,
    pub profile_id: String,
    pub instrument_id: String,
    pub item_id: String,
}

impl ChoiceQuery {
    pub fn validate(&self) -> Result<(), GatewayError> {
        if self.options.len() < 2 {
            return Err(GatewayError::InvalidQuery("fewer than two options".into()));
        }
        let mut seen = std::collections::HashSet::new();
        if !self.options.iter().all(|o| seen.insert(o)) {
            return Err(GatewayError::InvalidQuery("duplicate options".into()));
        }
        if self.options.iter().any(|o| o.parse::<u8>().is_err()) {
            return Err(GatewayError::InvalidQuery("options must be numeric".into()));
        }
        if !self.labels.is_empty() && self.labels.len() != self.options.len() {
            return Err(GatewayError::InvalidQuery("labels do not match options".into()));
        }
        Ok(())
    }

    pub fn continuations(&self, style: OptionStyle) -> Vec<String> {
        match style {
            OptionStyle::DigitLabel if !self.labels.is_empty() => {
                self.options.iter().zip(&self.labels).map(|(o, l)| format!("{o} = \"{l}\"")).collect()
            }
            _ => self.options.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChoiceResult {
    pub chosen: u8,
    pub scores: Option<Vec<f64>>,
    pub backend: String,
    pub latency_ms: u64,
    pub retries: u32,
    pub tie_break: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRequest {
    pub prompt: String,
    pub profile_id: String,
    pub repeat: u32,
    pub max_tokens: u32,
    pub temperature: f64,
    pub seed: u64,
}

/// Outcome of one backend call, before retry handling.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CallError {
    #[error("transient failure: {0}")]
    Transient(String),
    #[error("timed out")]
    Timeout,
    #[error("{0}")]
    Fatal(String),
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GatewayError {
    #[error("invalid query: {0}")]
    InvalidQuery(String),
    #[error("backend answered {0:?}, which is not an option")]
    NonOption(String),
    #[error("gave up after {attempts} attempts: {last}")]
    Exhausted { attempts: u32, last: String },
    #[error("request timed out after {attempts} attempts")]
    Timeout { attempts: u32 },
    #[error("backend error: {0}")]
    Backend(String),
    #[error("empty completion")]
    EmptyCompletion,
    #[error("predictor rejected text: {0}")]
    Rejected(String),
    #[error("{0}")]
    Config(String),
}

impl GatewayError {
    /// Failures that end in a missing-response record rather than aborting.
    pub fn is_recoverable(&self) -> bool {
        matches!(self, GatewayError::Exhausted { .. } | GatewayError::Timeout { .. })
    }
}

/// A scoring, generation and prediction endpoint.
pub trait Backend: Send + Sync {
    /// Log-likelihood of each continuation given the prompt.
    fn score_options(&self, query: &ChoiceQuery, continuations: &[String], key: &str) -> Result<Vec<f64>, CallError>;
    /// A single completion restricted to `continuations`.
    fn constrained_choice(&self, query: &ChoiceQuery, continuations: &[String], key: &str) -> Result<String, CallError>;
    fn generate(&self, request: &GenerationRequest, key: &str) -> Result<String, CallError>;
    /// Big Five scores predicted from free text.
    fn predict(&self, profile_id: &str, text: &str, key: &str) -> Result<[f64; 5], CallError>;
}

/// Shared request pacing. Each caller reserves the next free slot with one
/// atomic update and sleeps until it arrives.
#[derive(Debug)]
pub struct RateLimiter {
    interval_nanos: u64,
    next_slot: AtomicU64,
    start: Instant,
}

impl RateLimiter {
    pub fn per_second(rate: f64) -> Self {
        Self { interval_nanos: (1e9 / rate.max(1e-9)) as u64, next_slot: AtomicU64::new(0), start: Instant::now() }
    }

    /// Reserves a slot and returns how long the caller must wait for it.
    pub fn reserve(&self) -> Duration {
        let now = self.start.elapsed().as_nanos() as u64;
        let prev = self
            .next_slot
            .fetch_update(Ordering::AcqRel, Ordering::Acquire, |n| Some(n.max(now) + self.interval_nanos))
            .expect("closure always returns Some");
        Duration::from_nanos(prev.max(now) - now)
    }

    pub fn acquire(&self) {
        let wait = self.reserve();
        if !wait.is_zero() {
            std::thread::sleep(wait);
        }
    }
}

#[derive(Debug, Default)]
pub struct GatewayCounters {
    pub requests: AtomicU64,
    pub retries: AtomicU64,
    pub failures: AtomicU64,
}

/// Retrying, rate-limited front end to one backend. Safe to share across
/// worker threads.
pub struct Gateway {
    descriptor: BackendDescriptor,
    backend: Arc<dyn Backend>,
    limiter: Option<RateLimiter>,
    sleep: fn(Duration),
    pub counters: GatewayCounters,
}

impl std::fmt::Debug for Gateway {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Gateway").field("descriptor", &self.descriptor).finish_non_exhaustive()
    }
}

impl Gateway {
    pub fn new(descriptor: BackendDescriptor, backend: Arc<dyn Backend>) -> Self {
        let limiter = descriptor.rate_limit.map(RateLimiter::per_second);
        Self { descriptor, backend, limiter, sleep: std::thread::sleep, counters: GatewayCounters::default() }
    }

    /// HTTP gateway for non-mock descriptors.
    pub fn http(descriptor: BackendDescriptor) -> Result<Self, GatewayError> {
        let backend = crate::http::HttpBackend::new(&descriptor)?;
        Ok(Self::new(descriptor, Arc::new(backend)))
    }

    pub fn mock(descriptor: BackendDescriptor, mock: MockBackend) -> Self {
        Self::new(descriptor, Arc::new(mock))
    }

    /// Replaces the backoff sleep, e.g. with a no-op in tests.
    pub fn with_sleep(mut self, sleep: fn(Duration)) -> Self {
        self.sleep = sleep;
        self
    }

    pub fn descriptor(&self) -> &BackendDescriptor {
        &self.descriptor
    }

    pub fn backend_id(&self) -> &str {
        &self.descriptor.id
    }

    fn with_retries<T>(&self, mut call: impl FnMut() -> Result<T, CallError>) -> Result<(T, u32), GatewayError> {
        let max = self.descriptor.retry.max_attempts.max(1);
        let mut last = CallError::Transient("no attempt made".into());
        for attempt in 0..max {
            if let Some(l) = &self.limiter {
                l.acquire();
            }
            self.counters.requests.fetch_add(1, Ordering::Relaxed);
            match call() {
                Ok(v) => return Ok((v, attempt)),
                Err(CallError::Fatal(m)) => {
                    self.counters.failures.fetch_add(1, Ordering::Relaxed);
                    return Err(GatewayError::Backend(m));
                }
                Err(e) => {
                    log::debug!("{} attempt {} failed: {e}", self.descriptor.id, attempt + 1);
                    last = e;
                    if attempt + 1 < max {
                        self.counters.retries.fetch_add(1, Ordering::Relaxed);
                        (self.sleep)(self.descriptor.retry.backoff(attempt));
                    }
                }
            }
        }
        self.counters.failures.fetch_add(1, Ordering::Relaxed);
        Err(match last {
            CallError::Timeout => GatewayError::Timeout { attempts: max },
            e => GatewayError::Exhausted { attempts: max, last: e.to_string() },
        })
    }

    /// Picks one option. Score-ranking backends (and the mock) return the
    /// argmax with ties going to the lowest option value; constrained
    /// backends must answer with an option verbatim.
    pub fn rank_choices(&self, query: &ChoiceQuery, key: &str) -> Result<ChoiceResult, GatewayError> {
        query.validate()?;
        let started = Instant::now();
        let continuations = query.continuations(self.descriptor.option_style);
        let (chosen, scores, tie_break, retries) = match self.descriptor.kind {
            BackendKind::ScoreOptions | BackendKind::Mock => {
                let (scores, retries) = self.with_retries(|| self.backend.score_options(query, &continuations, key))?;
                let (idx, tie) = argmax_lowest(query, &scores)?;
                (idx, Some(scores), tie, retries)
            }
            BackendKind::ConstrainedGenerate => {
                let (text, retries) = self.with_retries(|| self.backend.constrained_choice(query, &continuations, key))?;
                let answer = text.trim();
                let idx = continuations
                    .iter()
                    .position(|c| c == answer)
                    .or_else(|| query.options.iter().position(|o| o == answer))
                    .ok_or_else(|| GatewayError::NonOption(text.clone()))?;
                (idx, None, false, retries)
            }
        };
        Ok(ChoiceResult {
            chosen: query.options[chosen].parse().expect("validated numeric"),
            scores,
            backend: self.descriptor.id.clone(),
            latency_ms: started.elapsed().as_millis() as u64,
            retries,
            tie_break,
        })
    }

    pub fn generate_text(&self, request: &GenerationRequest, key: &str) -> Result<(String, u32), GatewayError> {
        let (text, retries) = self.with_retries(|| self.backend.generate(request, key))?;
        if text.trim().is_empty() {
            return Err(GatewayError::EmptyCompletion);
        }
        Ok((text, retries))
    }

    pub fn predict_personality(&self, profile_id: &str, text: &str, key: &str) -> Result<([f64; 5], u32), GatewayError> {
        if text.split_whitespace().count() < MIN_PREDICTOR_WORDS {
            return Err(GatewayError::Rejected(format!("fewer than {MIN_PREDICTOR_WORDS} words")));
        }
        self.with_retries(|| self.backend.predict(profile_id, text, key))
    }
}

/// Predictors refuse texts shorter than this.
pub const MIN_PREDICTOR_WORDS: usize = 5;

/// Index of the best score; equal maxima resolve to the lowest option value.
fn argmax_lowest(query: &ChoiceQuery, scores: &[f64]) -> Result<(usize, bool), GatewayError> {
    if scores.len() != query.options.len() {
        return Err(GatewayError::Backend(format!("{} scores for {} options", scores.len(), query.options.len())));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(GatewayError::Backend("NaN option score".into()));
    }
    let best = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut tied: Vec<usize> = (0..scores.len()).filter(|&i| scores[i] == best).collect();
    tied.sort_by_key(|&i| query.options[i].parse::<u8>().unwrap_or(u8::MAX));
    Ok((tied[0], tied.len() > 1))
}

/// Domain order used by predictor payloads.
pub fn domain_scores_json(scores: &[f64; 5]) -> serde_json::Value {
    serde_json::Value::Object(Domain::ALL.iter().map(|d| (d.code().to_string(), scores[d.index()].into())).collect())
}
