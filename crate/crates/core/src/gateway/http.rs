//! HTTP transport for chat-completions endpoints, with retry and backoff.
//!
//! The wire format is the common chat-completions POST: `model`, `messages`,
//! `temperature`, `n`; completions come back under `choices[].message.content`.
//! Bearer auth is read from the environment variable named by the endpoint
//! configuration, never from config files.

use super::{ChatRequest, ModelEndpoint, RequestCounter, RequestKind, Responder, RetryPolicy};
use crate::error::{Error, Result};
use serde::Deserialize;
use serde_json::json;
use std::sync::Mutex;

/// A transport-level failure and whether retrying can help.
#[derive(Debug, Clone)]
pub struct TransportError {
    pub status: Option<u16>,
    pub message: String,
    pub retryable: bool,
}

impl TransportError {
    pub fn retryable(status: Option<u16>, message: impl Into<String>) -> Self {
        TransportError { status, message: message.into(), retryable: true }
    }

    pub fn fatal(status: Option<u16>, message: impl Into<String>) -> Self {
        TransportError { status, message: message.into(), retryable: false }
    }
}

/// Low-level POST of one chat request. Separated from the responder so the
/// retry logic is testable without a server.
pub trait ChatTransport: Send + Sync {
    fn post_chat(
        &self,
        endpoint: &ModelEndpoint,
        request: &ChatRequest,
    ) -> std::result::Result<Vec<String>, TransportError>;
}

#[derive(Deserialize)]
struct ChoiceMessage {
    content: String,
}

#[derive(Deserialize)]
struct Choice {
    message: ChoiceMessage,
}

#[derive(Deserialize)]
struct ChatCompletionResponse {
    choices: Vec<Choice>,
}

/// Blocking reqwest-based transport.
pub struct ReqwestTransport {
    client: reqwest::blocking::Client,
    api_key: Option<String>,
}

impl ReqwestTransport {
    pub fn new(endpoint: &ModelEndpoint) -> Result<Self> {
        let api_key = match &endpoint.api_key_env {
            Some(var) => Some(std::env::var(var).map_err(|_| {
                Error::Config(format!(
                    "endpoint `{}`: auth environment variable `{var}` is not set",
                    endpoint.name
                ))
            })?),
            None => None,
        };
        let client = reqwest::blocking::Client::builder()
            .timeout(std::time::Duration::from_secs(300))
            .build()
            .map_err(|e| Error::Gateway(format!("http client: {e}")))?;
        Ok(ReqwestTransport { client, api_key })
    }
}

impl ChatTransport for ReqwestTransport {
    fn post_chat(
        &self,
        endpoint: &ModelEndpoint,
        request: &ChatRequest,
    ) -> std::result::Result<Vec<String>, TransportError> {
        let url = format!(
            "{}{}",
            endpoint.base_url.trim_end_matches('/'),
            endpoint.path
        );
        let mut messages = Vec::new();
        if let Some(system) = &request.system {
            messages.push(json!({"role": "system", "content": system}));
        }
        messages.push(json!({"role": "user", "content": request.user}));
        let body = json!({
            "model": request.model,
            "messages": messages,
            "temperature": request.temperature,
            "n": request.n,
        });
        let mut req = self.client.post(&url).json(&body);
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let response = req
            .send()
            .map_err(|e| TransportError::retryable(None, format!("transport: {e}")))?;
        let status = response.status();
        if !status.is_success() {
            let code = status.as_u16();
            let text = response.text().unwrap_or_default();
            let message = format!("HTTP {code}: {}", text.chars().take(200).collect::<String>());
            return if code == 401 || code == 403 {
                Err(TransportError::fatal(Some(code), message))
            } else if code == 429 || status.is_server_error() {
                Err(TransportError::retryable(Some(code), message))
            } else {
                Err(TransportError::fatal(Some(code), message))
            };
        }
        let parsed: ChatCompletionResponse = response
            .json()
            .map_err(|e| TransportError::fatal(None, format!("malformed response body: {e}")))?;
        Ok(parsed.choices.into_iter().map(|c| c.message.content).collect())
    }
}

/// Per-responder counters surfaced in the run log.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct GatewayStats {
    pub requests: usize,
    pub retries: usize,
}

/// A responder that POSTs to a chat endpoint, retrying transient failures
/// with exponential backoff.
pub struct HttpResponder<T: ChatTransport> {
    endpoint: ModelEndpoint,
    transport: T,
    retry: RetryPolicy,
    counter: RequestCounter,
    stats: Mutex<GatewayStats>,
}

impl HttpResponder<ReqwestTransport> {
    pub fn connect(endpoint: ModelEndpoint, retry: RetryPolicy) -> Result<Self> {
        endpoint.validate()?;
        let transport = ReqwestTransport::new(&endpoint)?;
        Ok(Self::with_transport(endpoint, transport, retry))
    }
}

impl<T: ChatTransport> HttpResponder<T> {
    pub fn with_transport(endpoint: ModelEndpoint, transport: T, retry: RetryPolicy) -> Self {
        HttpResponder {
            endpoint,
            transport,
            retry,
            counter: RequestCounter::default(),
            stats: Mutex::new(GatewayStats::default()),
        }
    }

    pub fn stats(&self) -> GatewayStats {
        *self.stats.lock().unwrap()
    }

    fn post_with_retry(&self, tag: &str, request: &ChatRequest) -> Result<Vec<String>> {
        let mut attempt = 0;
        loop {
            self.counter.bump();
            {
                let mut stats = self.stats.lock().unwrap();
                stats.requests += 1;
            }
            match self.transport.post_chat(&self.endpoint, request) {
                Ok(texts) => return Ok(texts),
                Err(e) if e.status == Some(401) || e.status == Some(403) => {
                    return Err(Error::Config(format!(
                        "endpoint `{}`: authentication failed: {}",
                        self.endpoint.name, e.message
                    )));
                }
                Err(e) if !e.retryable => {
                    return Err(Error::Gateway(format!(
                        "endpoint `{}`: {}",
                        self.endpoint.name, e.message
                    )));
                }
                Err(e) => {
                    attempt += 1;
                    if attempt >= self.retry.max_attempts {
                        return Err(Error::Gateway(format!(
                            "endpoint `{}`: giving up after {attempt} attempts: {}",
                            self.endpoint.name, e.message
                        )));
                    }
                    {
                        let mut stats = self.stats.lock().unwrap();
                        stats.retries += 1;
                    }
                    std::thread::sleep(self.retry.delay(attempt - 1, tag));
                }
            }
        }
    }
}

impl<T: ChatTransport> Responder for HttpResponder<T> {
    fn complete(&self, kind: RequestKind<'_>, request: &ChatRequest) -> Result<Vec<String>> {
        let tag = kind.tag();
        if self.endpoint.batch_samples || request.n == 1 {
            self.post_with_retry(&tag, request)
        } else {
            // n single-sample requests, tagged per sample for backoff jitter.
            let mut single = request.clone();
            single.n = 1;
            let mut texts = Vec::with_capacity(request.n);
            for i in 0..request.n {
                let sample_tag = format!("{tag}#{i}");
                let mut got = self.post_with_retry(&sample_tag, &single)?;
                texts.append(&mut got);
            }
            Ok(texts)
        }
    }

    fn request_count(&self) -> usize {
        self.counter.get()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::VariantKind;
    use crate::gateway::ConditionKey;
    use crate::lang::Language;
    use crate::prompting::AnswerOrder;
    use std::sync::atomic::{AtomicUsize, Ordering};

    fn endpoint() -> ModelEndpoint {
        ModelEndpoint {
            name: "test".to_string(),
            base_url: "http://localhost:0".to_string(),
            path: "/v1/chat/completions".to_string(),
            api_key_env: None,
            max_in_flight: 2,
            requests_per_minute: None,
            temperature: 1.0,
            n: 1,
            batch_samples: true,
        }
    }

    fn fast_retry() -> RetryPolicy {
        RetryPolicy { max_attempts: 5, base_delay_ms: 0, max_delay_ms: 0 }
    }

    fn request() -> ChatRequest {
        ChatRequest {
            model: "m".to_string(),
            system: None,
            user: "hello".to_string(),
            temperature: 1.0,
            n: 1,
        }
    }

    fn opinion_key() -> ConditionKey {
        ConditionKey {
            model: "m".to_string(),
            language: Language::En,
            statement_id: "s1".to_string(),
            variant_kind: VariantKind::Original,
            template_id: "t1".to_string(),
            answer_order: AnswerOrder::Normal,
        }
    }

    /// Scripted transport: a sequence of status codes, then success.
    struct Scripted {
        calls: AtomicUsize,
        failures: Vec<u16>,
    }

    impl ChatTransport for Scripted {
        fn post_chat(
            &self,
            _endpoint: &ModelEndpoint,
            request: &ChatRequest,
        ) -> std::result::Result<Vec<String>, TransportError> {
            let call = self.calls.fetch_add(1, Ordering::SeqCst);
            if let Some(&code) = self.failures.get(call) {
                let err = if code == 429 || code >= 500 {
                    TransportError::retryable(Some(code), format!("HTTP {code}"))
                } else {
                    TransportError::fatal(Some(code), format!("HTTP {code}"))
                };
                return Err(err);
            }
            Ok(vec!["I agree.".to_string(); request.n])
        }
    }

    #[test]
    fn rate_limited_twice_then_succeeds() {
        let transport = Scripted { calls: AtomicUsize::new(0), failures: vec![429, 429] };
        let responder = HttpResponder::with_transport(endpoint(), transport, fast_retry());
        let key = opinion_key();
        let texts = responder.complete(RequestKind::Opinion(&key), &request()).unwrap();
        assert_eq!(texts.len(), 1);
        let stats = responder.stats();
        assert_eq!(stats.retries, 2, "run log must show both retries");
        assert_eq!(stats.requests, 3);
    }

    #[test]
    fn retry_budget_exhausts_into_gateway_error() {
        let transport =
            Scripted { calls: AtomicUsize::new(0), failures: vec![500, 500, 500, 500, 500, 500] };
        let responder = HttpResponder::with_transport(endpoint(), transport, fast_retry());
        let key = opinion_key();
        let err = responder.complete(RequestKind::Opinion(&key), &request()).unwrap_err();
        assert!(err.to_string().contains("giving up after 5 attempts"), "{err}");
    }

    #[test]
    fn auth_failure_is_fatal_config_error() {
        let transport = Scripted { calls: AtomicUsize::new(0), failures: vec![401] };
        let responder = HttpResponder::with_transport(endpoint(), transport, fast_retry());
        let key = opinion_key();
        let err = responder.complete(RequestKind::Opinion(&key), &request()).unwrap_err();
        assert!(matches!(err, Error::Config(_)), "{err}");
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn unbatched_mode_issues_n_requests() {
        let transport = Scripted { calls: AtomicUsize::new(0), failures: vec![] };
        let mut ep = endpoint();
        ep.batch_samples = false;
        let responder = HttpResponder::with_transport(ep, transport, fast_retry());
        let key = opinion_key();
        let mut req = request();
        req.n = 7;
        let texts = responder.complete(RequestKind::Opinion(&key), &req).unwrap();
        assert_eq!(texts.len(), 7);
        assert_eq!(responder.stats().requests, 7);
    }

    #[test]
    fn missing_auth_env_is_config_error() {
        let mut ep = endpoint();
        ep.api_key_env = Some("STANCEGRID_TEST_TOKEN_THAT_DOES_NOT_EXIST".to_string());
        let err = match ReqwestTransport::new(&ep) {
            Err(e) => e,
            Ok(_) => panic!("expected a config error"),
        };
        assert!(matches!(err, Error::Config(_)));
    }
}
