//! Dispatch of sampled completions to chat endpoints: bounded concurrency,
//! retries with backoff, per-endpoint rate limiting. Simulated models live
//! in [`mock`]; the HTTP transport in [`http`].

pub mod http;
pub mod mock;

use crate::corpus::VariantKind;
use crate::error::{Error, Result};
use crate::lang::Language;
use crate::prompting::AnswerOrder;
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{mpsc, Mutex};
use std::time::{Duration, Instant};

/// A chat-completions endpoint with its request limits and sampling defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelEndpoint {
    pub name: String,
    pub base_url: String,
    #[serde(default = "default_path")]
    pub path: String,
    /// Name of the environment variable holding the bearer token, if any.
    #[serde(default)]
    pub api_key_env: Option<String>,
    #[serde(default = "default_in_flight")]
    pub max_in_flight: usize,
    #[serde(default)]
    pub requests_per_minute: Option<u32>,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    #[serde(default = "default_n")]
    pub n: usize,
    /// One n-sample request per condition (true) or n single-sample requests.
    #[serde(default = "default_true")]
    pub batch_samples: bool,
}

fn default_path() -> String {
    "/v1/chat/completions".to_string()
}
fn default_in_flight() -> usize {
    4
}
fn default_temperature() -> f64 {
    1.0
}
fn default_n() -> usize {
    30
}
fn default_true() -> bool {
    true
}

impl ModelEndpoint {
    pub fn validate(&self) -> Result<()> {
        if self.temperature < 0.0 {
            return Err(Error::Config(format!(
                "endpoint `{}`: temperature must be >= 0",
                self.name
            )));
        }
        if self.n < 1 {
            return Err(Error::Config(format!("endpoint `{}`: n must be >= 1", self.name)));
        }
        if self.max_in_flight < 1 {
            return Err(Error::Config(format!(
                "endpoint `{}`: max_in_flight must be >= 1",
                self.name
            )));
        }
        Ok(())
    }
}

/// Identity of one prompt condition in a run.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ConditionKey {
    pub model: String,
    pub language: Language,
    pub statement_id: String,
    pub variant_kind: VariantKind,
    pub template_id: String,
    pub answer_order: AnswerOrder,
}

impl ConditionKey {
    /// Stable textual form, used for cache lookups and seed derivation.
    pub fn tag(&self) -> String {
        format!(
            "{}|{}|{}|{}|{}|{}",
            self.model,
            self.language,
            self.statement_id,
            self.variant_kind,
            self.template_id,
            self.answer_order
        )
    }
}

/// One raw sampled completion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawResponse {
    #[serde(flatten)]
    pub key: ConditionKey,
    pub sample_index: usize,
    pub text: String,
    pub latency_ms: u64,
    /// Transport status: "ok" or an error marker.
    pub status: String,
}

/// A chat request as seen by responders.
#[derive(Debug, Clone, PartialEq)]
pub struct ChatRequest {
    pub model: String,
    pub system: Option<String>,
    pub user: String,
    pub temperature: f64,
    pub n: usize,
}

/// What kind of cell a request belongs to; mocks key their behavior off it.
#[derive(Debug, Clone, Copy)]
pub enum RequestKind<'a> {
    /// A closed-ended opinion probe.
    Opinion(&'a ConditionKey),
    /// Free-form generation or judging; the cell string is a stable id.
    Free { cell: &'a str },
}

impl RequestKind<'_> {
    pub fn tag(&self) -> String {
        match self {
            RequestKind::Opinion(key) => key.tag(),
            RequestKind::Free { cell } => (*cell).to_string(),
        }
    }
}

/// Anything that can answer chat requests: HTTP endpoints or mocks.
pub trait Responder: Send + Sync {
    /// Produce exactly `request.n` completions.
    fn complete(&self, kind: RequestKind<'_>, request: &ChatRequest) -> Result<Vec<String>>;

    /// Number of (simulated) network calls served so far.
    fn request_count(&self) -> usize;
}

/// Sample n completions for one condition; the primitive behind dispatch.
pub fn sample_responses(
    responder: &dyn Responder,
    key: &ConditionKey,
    prompt: &str,
    n: usize,
    temperature: f64,
) -> Result<Vec<RawResponse>> {
    if n == 0 {
        return Err(Error::Gateway("sample count n must be >= 1".to_string()));
    }
    let request = ChatRequest {
        model: key.model.clone(),
        system: None,
        user: prompt.to_string(),
        temperature,
        n,
    };
    let start = Instant::now();
    let texts = responder.complete(RequestKind::Opinion(key), &request)?;
    let latency_ms = start.elapsed().as_millis() as u64;
    if texts.len() != n {
        return Err(Error::Gateway(format!(
            "expected {n} completions for {}, got {}",
            key.tag(),
            texts.len()
        )));
    }
    Ok(texts
        .into_iter()
        .enumerate()
        .map(|(sample_index, text)| RawResponse {
            key: key.clone(),
            sample_index,
            text,
            latency_ms,
            status: "ok".to_string(),
        })
        .collect())
}

/// Retry schedule for transient transport failures.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_delay_ms: u64,
    pub max_delay_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy { max_attempts: 5, base_delay_ms: 250, max_delay_ms: 8_000 }
    }
}

impl RetryPolicy {
    /// Exponential backoff with deterministic jitter.
    pub fn delay(&self, attempt: u32, tag: &str) -> Duration {
        let exp = self.base_delay_ms.saturating_mul(1u64 << attempt.min(16));
        let capped = exp.min(self.max_delay_ms);
        let jitter = if capped > 0 {
            crate::util::derive_seed(u64::from(attempt), tag) % (capped / 2 + 1)
        } else {
            0
        };
        Duration::from_millis(capped + jitter)
    }
}

/// One unit of dispatch work: a rendered condition awaiting samples.
#[derive(Debug, Clone)]
pub struct WorkItem {
    pub key: ConditionKey,
    pub prompt: String,
    pub n: usize,
    pub temperature: f64,
}

/// Dispatch outcome counters.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DispatchReport {
    pub conditions_completed: usize,
    pub conditions_failed: usize,
    pub responses: usize,
}

/// Simple requests-per-minute limiter shared across workers.
struct RateLimiter {
    next_allowed: Mutex<Instant>,
    interval: Duration,
}

impl RateLimiter {
    fn new(requests_per_minute: u32) -> Self {
        RateLimiter {
            next_allowed: Mutex::new(Instant::now()),
            interval: Duration::from_secs_f64(60.0 / f64::from(requests_per_minute.max(1))),
        }
    }

    fn acquire(&self) {
        let wait = {
            let mut next = self.next_allowed.lock().unwrap();
            let now = Instant::now();
            let wait = next.saturating_duration_since(now);
            *next = now.max(*next) + self.interval;
            wait
        };
        if !wait.is_zero() {
            std::thread::sleep(wait);
        }
    }
}

/// Run all work items against a responder with at most `max_in_flight`
/// concurrent requests, streaming results to `sink` from a single thread.
/// Failed conditions are collected into a PartialRun error after the rest
/// complete, keeping reruns resumable.
pub fn dispatch(
    work: Vec<WorkItem>,
    responder: &dyn Responder,
    max_in_flight: usize,
    requests_per_minute: Option<u32>,
    sink: &mut dyn FnMut(RawResponse) -> Result<()>,
) -> Result<DispatchReport> {
    let expected = work.len();
    if expected == 0 {
        return Ok(DispatchReport::default());
    }
    let queue: Mutex<VecDeque<WorkItem>> = Mutex::new(work.into());
    let limiter = requests_per_minute.map(RateLimiter::new);
    let (tx, rx) = mpsc::channel::<std::result::Result<Vec<RawResponse>, (ConditionKey, Error)>>();
    let workers = max_in_flight.max(1);

    let mut report = DispatchReport::default();
    let mut failures: Vec<String> = Vec::new();

    std::thread::scope(|scope| {
        for _ in 0..workers {
            let tx = tx.clone();
            let queue = &queue;
            let limiter = limiter.as_ref();
            scope.spawn(move || loop {
                let item = { queue.lock().unwrap().pop_front() };
                let Some(item) = item else { break };
                if let Some(l) = limiter {
                    l.acquire();
                }
                let outcome =
                    sample_responses(responder, &item.key, &item.prompt, item.n, item.temperature)
                        .map_err(|e| (item.key.clone(), e));
                if tx.send(outcome).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        for outcome in rx {
            match outcome {
                Ok(responses) => {
                    report.conditions_completed += 1;
                    for response in responses {
                        report.responses += 1;
                        if let Err(e) = sink(response) {
                            failures.push(format!("sink: {e}"));
                        }
                    }
                }
                Err((key, e)) => {
                    report.conditions_failed += 1;
                    failures.push(format!("{}: {e}", key.tag()));
                }
            }
        }
    });

    if report.conditions_failed > 0 || !failures.is_empty() {
        failures.truncate(10);
        return Err(Error::PartialRun {
            completed: report.conditions_completed,
            expected,
            gaps: failures,
        });
    }
    Ok(report)
}

/// Shared request counter for responder implementations.
#[derive(Debug, Default)]
pub struct RequestCounter(AtomicUsize);

impl RequestCounter {
    pub fn bump(&self) {
        self.0.fetch_add(1, Ordering::Relaxed);
    }

    pub fn get(&self) -> usize {
        self.0.load(Ordering::Relaxed)
    }
}
