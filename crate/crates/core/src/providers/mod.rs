//! External services: web search, fact-check claim search and LLM generation.
//!
//! A [`Transport`] turns a request into a raw response body (live HTTP,
//! recorded fixtures, or a test script). [`Service`] layers the response
//! cache, rate limiting, retries and body parsing on top of any transport.

pub mod cassette;
pub mod clock;
pub mod live;
pub mod wire;

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::model::{ClaimReviewResult, WebResult};

pub use cassette::{CassetteStore, FixtureTransport};
pub use clock::{Clock, FrozenClock, RateLimiter, SystemClock, VirtualClock};
pub use live::{Credentials, LiveTransport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderKind {
    WebSearch,
    FactCheck,
    Llm,
}

impl ProviderKind {
    pub const ALL: [ProviderKind; 3] = [ProviderKind::WebSearch, ProviderKind::FactCheck, ProviderKind::Llm];

    pub fn as_str(self) -> &'static str {
        match self {
            ProviderKind::WebSearch => "web_search",
            ProviderKind::FactCheck => "fact_check",
            ProviderKind::Llm => "llm",
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for ProviderKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProviderError {
    #[error("{provider}: transport failure: {message}")]
    Transport { provider: ProviderKind, message: String },

    #[error("{provider}: HTTP status {status}: {body}")]
    Http {
        provider: ProviderKind,
        status: u16,
        body: String,
    },

    #[error("{provider}: malformed response: {message}")]
    Decode { provider: ProviderKind, message: String },

    #[error("{provider}: invalid request: {message}")]
    InvalidRequest { provider: ProviderKind, message: String },

    #[error("{provider}: no recorded response for request {hash}")]
    FixtureMissing { provider: ProviderKind, hash: String },

    #[error("provider configuration: {0}")]
    Config(String),

    #[error("response store: {0}")]
    Store(String),
}

impl ProviderError {
    /// Worth another attempt: network trouble, throttling, server errors.
    pub fn is_retryable(&self) -> bool {
        match self {
            ProviderError::Transport { .. } => true,
            ProviderError::Http { status, .. } => *status == 429 || *status >= 500,
            _ => false,
        }
    }

    /// Misconfiguration that should abort a run rather than mark one record.
    pub fn is_fatal(&self) -> bool {
        matches!(self, ProviderError::Config(_) | ProviderError::Store(_))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WebSearchRequest {
    pub query: String,
    pub num: u32,
    pub geo: String,
    pub lang_restrict: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub country: Option<String>,
}

impl WebSearchRequest {
    pub fn new(query: impl Into<String>) -> Self {
        WebSearchRequest {
            query: query.into(),
            num: 5,
            geo: "pt-BR".into(),
            lang_restrict: "lang_pt".into(),
            country: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FactCheckRequest {
    pub query: String,
    pub language_code: String,
    pub page_size: u32,
}

impl FactCheckRequest {
    pub fn new(query: impl Into<String>) -> Self {
        FactCheckRequest {
            query: query.into(),
            language_code: "pt-BR".into(),
            page_size: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LlmRequest {
    pub prompt: String,
    pub model: String,
    pub safety_off: bool,
    /// Generation settings passed through to the provider untouched.
    pub knobs: BTreeMap<String, String>,
}

impl LlmRequest {
    pub fn new(prompt: impl Into<String>) -> Self {
        LlmRequest {
            prompt: prompt.into(),
            model: "gemini-1.5-flash".into(),
            safety_off: true,
            knobs: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "provider", rename_all = "snake_case")]
pub enum ProviderRequest {
    WebSearch(WebSearchRequest),
    FactCheck(FactCheckRequest),
    Llm(LlmRequest),
}

impl ProviderRequest {
    pub fn kind(&self) -> ProviderKind {
        match self {
            ProviderRequest::WebSearch(_) => ProviderKind::WebSearch,
            ProviderRequest::FactCheck(_) => ProviderKind::FactCheck,
            ProviderRequest::Llm(_) => ProviderKind::Llm,
        }
    }

    /// Canonical serialization; field order is fixed by the type definitions.
    pub fn canonical(&self) -> String {
        serde_json::to_string(self).expect("requests serialize")
    }

    /// SHA-256 of the canonical form, hex encoded. Keys the cache and fixtures.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical().as_bytes()))
    }

    fn check(&self) -> Result<(), ProviderError> {
        let provider = self.kind();
        let bad = |message: &str| {
            Err(ProviderError::InvalidRequest {
                provider,
                message: message.into(),
            })
        };
        match self {
            ProviderRequest::WebSearch(r) if r.query.trim().is_empty() => bad("empty query"),
            ProviderRequest::WebSearch(r) if !(1..=10).contains(&r.num) => bad("num outside 1..=10"),
            ProviderRequest::FactCheck(r) if r.query.trim().is_empty() => bad("empty query"),
            ProviderRequest::FactCheck(r) if !(1..=10).contains(&r.page_size) => {
                bad("page_size outside 1..=10")
            }
            ProviderRequest::Llm(r) if r.prompt.trim().is_empty() => bad("empty prompt"),
            _ => Ok(()),
        }
    }
}

/// A raw response body and the instant it was obtained from the provider.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fetched {
    pub body: String,
    pub captured_at: DateTime<Utc>,
}

pub trait Transport: Send + Sync {
    fn send(&self, req: &ProviderRequest) -> Result<Fetched, ProviderError>;

    /// Live transports are subject to rate limiting.
    fn is_live(&self) -> bool {
        true
    }
}

/// A transport backed by a closure; handy for stubs and scripted providers.
pub struct FnTransport<F>(pub F);

impl<F> Transport for FnTransport<F>
where
    F: Fn(&ProviderRequest) -> Result<String, ProviderError> + Send + Sync,
{
    fn send(&self, req: &ProviderRequest) -> Result<Fetched, ProviderError> {
        (self.0)(req).map(|body| Fetched {
            body,
            captured_at: DateTime::UNIX_EPOCH,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CacheMode {
    #[default]
    ReadWrite,
    ReadOnly,
    Bypass,
}

impl std::str::FromStr for CacheMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "read_write" => Ok(CacheMode::ReadWrite),
            "read_only" => Ok(CacheMode::ReadOnly),
            "bypass" => Ok(CacheMode::Bypass),
            _ => Err(format!("unknown cache mode {s:?} (read_write, read_only, bypass)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProviderPolicy {
    pub max_retries: u32,
    pub initial_backoff_ms: u64,
    pub backoff_multiplier: f64,
    /// Requests per second per provider; 0 disables the limit.
    pub rate_limit: u32,
    pub cache_mode: CacheMode,
}

impl Default for ProviderPolicy {
    fn default() -> Self {
        ProviderPolicy {
            max_retries: 3,
            initial_backoff_ms: 500,
            backoff_multiplier: 2.0,
            rate_limit: 5,
            cache_mode: CacheMode::ReadWrite,
        }
    }
}

impl ProviderPolicy {
    pub fn validate(&self) -> crate::Result<()> {
        if !(self.backoff_multiplier >= 1.0) {
            return Err(crate::Error::Config("backoff_multiplier must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetryEvent {
    pub provider: ProviderKind,
    pub attempt: u32,
    pub error: String,
}

/// A parsed provider answer plus its provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct Response<T> {
    pub value: T,
    pub captured_at: DateTime<Utc>,
    pub from_cache: bool,
}

/// Shareable front for all three providers.
pub struct Service {
    transport: Arc<dyn Transport>,
    cache: Option<CassetteStore>,
    policy: ProviderPolicy,
    clock: Arc<dyn Clock>,
    limiters: [RateLimiter; 3],
    invocations: [AtomicU64; 3],
    retries: Mutex<Vec<RetryEvent>>,
}

impl fmt::Debug for Service {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Service")
            .field("cache", &self.cache)
            .field("policy", &self.policy)
            .finish_non_exhaustive()
    }
}

impl Service {
    pub fn new(transport: Arc<dyn Transport>, policy: ProviderPolicy, clock: Arc<dyn Clock>) -> Self {
        let rate = if transport.is_live() { policy.rate_limit } else { 0 };
        Service {
            transport,
            cache: None,
            limiters: [RateLimiter::new(rate), RateLimiter::new(rate), RateLimiter::new(rate)],
            policy,
            clock,
            invocations: Default::default(),
            retries: Mutex::new(Vec::new()),
        }
    }

    pub fn with_cache(mut self, dir: impl Into<PathBuf>) -> Self {
        self.cache = Some(CassetteStore::new(dir));
        self
    }

    pub fn clock(&self) -> &dyn Clock {
        &*self.clock
    }

    pub fn policy(&self) -> &ProviderPolicy {
        &self.policy
    }

    /// Transport calls made for one provider (cache hits excluded).
    pub fn invocations(&self, kind: ProviderKind) -> u64 {
        self.invocations[kind.index()].load(Ordering::SeqCst)
    }

    pub fn retry_events(&self) -> Vec<RetryEvent> {
        self.retries.lock().unwrap().clone()
    }

    fn fetch(&self, req: &ProviderRequest) -> Result<(Fetched, bool), ProviderError> {
        req.check()?;
        let mode = self.policy.cache_mode;
        let cache = self.cache.as_ref().filter(|_| mode != CacheMode::Bypass);
        if let Some(store) = cache {
            if let Some(hit) = store.load(req)? {
                return Ok((hit, true));
            }
        }
        let kind = req.kind();
        let mut delay = Duration::from_millis(self.policy.initial_backoff_ms);
        let mut attempt = 0;
        let fetched = loop {
            self.limiters[kind.index()].acquire(&*self.clock);
            self.invocations[kind.index()].fetch_add(1, Ordering::SeqCst);
            match self.transport.send(req) {
                Ok(f) => break f,
                Err(e) if e.is_retryable() && attempt < self.policy.max_retries => {
                    attempt += 1;
                    log::warn!("{kind} attempt {attempt} failed: {e}");
                    self.retries.lock().unwrap().push(RetryEvent {
                        provider: kind,
                        attempt,
                        error: e.to_string(),
                    });
                    self.clock.sleep(delay);
                    delay = delay.mul_f64(self.policy.backoff_multiplier);
                }
                Err(e) => return Err(e),
            }
        };
        if let Some(store) = cache.filter(|_| mode == CacheMode::ReadWrite) {
            store.save(req, &fetched)?;
        }
        Ok((fetched, false))
    }

    fn call<T>(
        &self,
        req: ProviderRequest,
        parse: impl FnOnce(&str) -> Result<T, ProviderError>,
    ) -> Result<Response<T>, ProviderError> {
        let (fetched, from_cache) = self.fetch(&req)?;
        Ok(Response {
            value: parse(&fetched.body)?,
            captured_at: fetched.captured_at,
            from_cache,
        })
    }

    /// Up to `num` ranked hits; an empty list is a successful outcome.
    pub fn web_search(&self, req: &WebSearchRequest) -> Result<Response<Vec<WebResult>>, ProviderError> {
        let num = req.num;
        self.call(ProviderRequest::WebSearch(req.clone()), |b| wire::parse_web(b, num))
    }

    pub fn factcheck_search(
        &self,
        req: &FactCheckRequest,
    ) -> Result<Response<Vec<ClaimReviewResult>>, ProviderError> {
        let n = req.page_size;
        self.call(ProviderRequest::FactCheck(req.clone()), |b| wire::parse_factcheck(b, n))
    }

    pub fn llm_generate(&self, req: &LlmRequest) -> Result<Response<String>, ProviderError> {
        self.call(ProviderRequest::Llm(req.clone()), wire::parse_llm)
    }
}

/// Gemini-shaped response body carrying `text`.
pub fn llm_body(text: &str) -> String {
    serde_json::json!({ "candidates": [{ "content": { "parts": [{ "text": text }], "role": "model" } }] })
        .to_string()
}
