use std::collections::HashMap;
use std::env;
use std::fs;
use std::path::Path;
use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::{millis, render_prompt, LlmError, PromptTemplate, SampleBatch, Variant};
use crate::corpus::CollegeMapping;

/// Where and how to send chat-completion requests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EndpointConfig {
    /// Base of an OpenAI-compatible API, e.g. `https://api.openai.com/v1`.
    pub base_url: String,
    pub model: String,
    /// Name of the environment variable holding the bearer token. The
    /// token itself never appears in configuration files.
    pub credential_env: Option<String>,
    pub timeout_secs: u64,
    /// Extra attempts after the first one for transient failures.
    pub max_retries: u32,
    pub max_in_flight: usize,
    /// First backoff delay; doubles on every retry.
    pub backoff_ms: u64,
    pub max_backoff_ms: u64,
    pub requests_per_minute: Option<u32>,
    pub temperature: Option<f64>,
}

impl Default for EndpointConfig {
    fn default() -> Self {
        Self {
            base_url: String::new(),
            model: String::new(),
            credential_env: None,
            timeout_secs: 120,
            max_retries: 3,
            max_in_flight: 2,
            backoff_ms: 1000,
            max_backoff_ms: 60_000,
            requests_per_minute: None,
            temperature: None,
        }
    }
}

impl EndpointConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, LlmError> {
        toml::from_str(text).map_err(|e| LlmError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, LlmError> {
        Self::from_toml_str(&fs::read_to_string(path)?)
    }

    fn backoff(&self, attempt: u32) -> Duration {
        let factor = 1u64.checked_shl(attempt).unwrap_or(u64::MAX);
        Duration::from_millis(
            self.backoff_ms
                .saturating_mul(factor)
                .min(self.max_backoff_ms),
        )
    }
}

/// Text returned by a backend, with the number of retries it took.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Completion {
    pub text: String,
    pub retries: u32,
}

/// Anything that turns one prompt into one answer.
pub trait ChatBackend: Send + Sync {
    /// Identifies the endpoint in audit records.
    fn describe(&self) -> String;

    fn complete(&self, prompt: &str) -> Result<Completion, LlmError>;
}

/// One request/response pair, kept verbatim for the audit trail.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatExchange {
    pub request: String,
    pub raw: String,
    pub endpoint: String,
    pub latency_ms: u64,
    /// RFC 3339, UTC.
    pub timestamp: String,
    pub retries: u32,
}

/// Sends `prompt` through `backend` and records timing.
pub fn classify(backend: &dyn ChatBackend, prompt: &str) -> Result<ChatExchange, LlmError> {
    let timestamp = chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true);
    let started = Instant::now();
    let completion = backend.complete(prompt)?;
    Ok(ChatExchange {
        request: prompt.to_owned(),
        raw: completion.text,
        endpoint: backend.describe(),
        latency_ms: millis(started.elapsed()),
        timestamp,
        retries: completion.retries,
    })
}

/// One-off request against an HTTP endpoint.
pub fn classify_remote(prompt: &str, config: &EndpointConfig) -> Result<ChatExchange, LlmError> {
    classify(&HttpChatBackend::new(config.clone())?, prompt)
}

/// Client for `POST {base_url}/chat/completions`.
pub struct HttpChatBackend {
    config: EndpointConfig,
    client: reqwest::blocking::Client,
    token: Option<String>,
    next_slot: Mutex<Option<Instant>>,
}

enum Attempt {
    Retry {
        message: String,
        timed_out: bool,
        wait: Option<Duration>,
    },
    Fatal(LlmError),
}

impl HttpChatBackend {
    pub fn new(config: EndpointConfig) -> Result<Self, LlmError> {
        if config.base_url.is_empty() {
            return Err(LlmError::Config("base_url is empty".into()));
        }
        if config.model.is_empty() {
            return Err(LlmError::Config("model is empty".into()));
        }
        let token = match &config.credential_env {
            Some(var) => Some(env::var(var).map_err(|_| {
                LlmError::AuthError(format!("environment variable {var} is not set"))
            })?),
            None => None,
        };
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| LlmError::Config(e.to_string()))?;
        Ok(Self {
            config,
            client,
            token,
            next_slot: Mutex::new(None),
        })
    }

    pub fn config(&self) -> &EndpointConfig {
        &self.config
    }

    /// Blocks until this request may start under `requests_per_minute`.
    fn pace(&self) {
        let Some(rpm) = self.config.requests_per_minute.filter(|r| *r > 0) else {
            return;
        };
        let interval = Duration::from_secs(60) / rpm;
        let now = Instant::now();
        let start = {
            let mut next = self.next_slot.lock().expect("pacing lock");
            let start = next.map_or(now, |n| n.max(now));
            *next = Some(start + interval);
            start
        };
        if start > now {
            thread::sleep(start - now);
        }
    }

    fn attempt(&self, url: &str, body: &serde_json::Value) -> Result<String, Attempt> {
        let mut request = self.client.post(url).json(body);
        if let Some(token) = &self.token {
            request = request.bearer_auth(token);
        }
        let response = request.send().map_err(|e| Attempt::Retry {
            message: e.to_string(),
            timed_out: e.is_timeout(),
            wait: None,
        })?;
        let status = response.status();
        let retry_after = response
            .headers()
            .get(reqwest::header::RETRY_AFTER)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.trim().parse::<u64>().ok())
            .map(Duration::from_secs);
        let text = response.text().map_err(|e| Attempt::Retry {
            message: e.to_string(),
            timed_out: e.is_timeout(),
            wait: None,
        })?;
        match status.as_u16() {
            200..=299 => extract_content(&text).map_err(Attempt::Fatal),
            401 | 403 => Err(Attempt::Fatal(LlmError::AuthError(format!(
                "HTTP {status}: {}",
                snippet(&text)
            )))),
            408 | 429 | 500..=599 => Err(Attempt::Retry {
                message: format!("HTTP {status}: {}", snippet(&text)),
                timed_out: false,
                wait: retry_after,
            }),
            _ => Err(Attempt::Fatal(LlmError::TransportError {
                attempts: 1,
                message: format!("HTTP {status}: {}", snippet(&text)),
            })),
        }
    }
}

impl ChatBackend for HttpChatBackend {
    fn describe(&self) -> String {
        format!("{} ({})", self.config.base_url, self.config.model)
    }

    fn complete(&self, prompt: &str) -> Result<Completion, LlmError> {
        let url = format!(
            "{}/chat/completions",
            self.config.base_url.trim_end_matches('/')
        );
        let mut body = serde_json::json!({
            "model": self.config.model,
            "messages": [{ "role": "user", "content": prompt }],
        });
        if let Some(t) = self.config.temperature {
            body["temperature"] = t.into();
        }
        let mut attempt = 0;
        loop {
            self.pace();
            let (message, timed_out, wait) = match self.attempt(&url, &body) {
                Ok(text) => {
                    return Ok(Completion {
                        text,
                        retries: attempt,
                    })
                }
                Err(Attempt::Fatal(LlmError::TransportError { message, .. })) => {
                    return Err(LlmError::TransportError {
                        attempts: attempt + 1,
                        message,
                    })
                }
                Err(Attempt::Fatal(e)) => return Err(e),
                Err(Attempt::Retry {
                    message,
                    timed_out,
                    wait,
                }) => (message, timed_out, wait),
            };
            if attempt >= self.config.max_retries {
                let attempts = attempt + 1;
                return Err(if timed_out {
                    LlmError::Timeout { attempts }
                } else {
                    LlmError::TransportError { attempts, message }
                });
            }
            let delay = wait
                .map(|w| w.min(Duration::from_millis(self.config.max_backoff_ms)))
                .unwrap_or_else(|| self.config.backoff(attempt));
            log::warn!("{url}: {message}; retrying in {delay:?}");
            thread::sleep(delay);
            attempt += 1;
        }
    }
}

fn snippet(text: &str) -> String {
    let mut s: String = text.chars().take(200).collect();
    if s.len() < text.len() {
        s.push('…');
    }
    s
}

fn extract_content(body: &str) -> Result<String, LlmError> {
    let malformed = |why: &str| LlmError::TransportError {
        attempts: 1,
        message: format!("malformed completion response ({why}): {}", snippet(body)),
    };
    let value: serde_json::Value =
        serde_json::from_str(body).map_err(|e| malformed(&e.to_string()))?;
    value["choices"][0]["message"]["content"]
        .as_str()
        .map(str::to_owned)
        .ok_or_else(|| malformed("no choices[0].message.content"))
}

/// Deliberate damage applied to a mock answer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Fault {
    /// Appends `n` spurious label lines.
    ExtraLines(usize),
    /// Drops the last `n` lines.
    MissingLines(usize),
    /// Replaces the label on answer line `line` (1-based) with `text`.
    UnknownLabel { line: usize, text: String },
    /// Puts a blank line after every answer line.
    BlankLines,
    /// Sleeps before answering.
    Delay(Duration),
    /// Applies the inner fault to the first request for the prompt only.
    FirstCallOnly(Box<Fault>),
}

/// Offline backend that answers from a prompt → answer table.
#[derive(Debug)]
pub struct MockBackend {
    answers: HashMap<String, (String, Vec<Fault>)>,
    variant: Variant,
    calls: Mutex<HashMap<String, usize>>,
}

impl MockBackend {
    /// Returns `text` for every prompt.
    pub fn fixed(text: &str) -> Self {
        let mut answers = HashMap::new();
        answers.insert(String::new(), (text.to_owned(), Vec::new()));
        Self {
            answers,
            variant: Variant::Plain,
            calls: Mutex::new(HashMap::new()),
        }
    }

    /// Answers each batch's prompt with its true labels, in the layout of
    /// the template's variant, after applying the faults listed for that
    /// sample id.
    pub fn for_batches(
        batches: &[SampleBatch],
        template: &PromptTemplate,
        mapping: &CollegeMapping,
        faults: &[(u32, Fault)],
    ) -> Self {
        let mut answers = HashMap::new();
        for batch in batches {
            let lines: Vec<String> = batch
                .items
                .iter()
                .map(|item| match template.variant() {
                    Variant::Plain => item.true_label.clone(),
                    Variant::Bracketed => {
                        format!(
                            "{} - {}",
                            template.document_line(&item.document),
                            item.true_label
                        )
                    }
                })
                .collect();
            let batch_faults = faults
                .iter()
                .filter(|(id, _)| *id == batch.sample_id)
                .map(|(_, f)| f.clone())
                .collect();
            answers.insert(
                render_prompt(template, batch, mapping),
                (lines.join("\n"), batch_faults),
            );
        }
        Self {
            answers,
            variant: template.variant(),
            calls: Mutex::new(HashMap::new()),
        }
    }

    /// Number of requests seen so far.
    pub fn calls(&self) -> usize {
        self.calls.lock().expect("mock lock").values().sum()
    }

    fn apply(&self, answer: &str, fault: &Fault, call: usize) -> String {
        let mut lines: Vec<String> = answer.lines().map(str::to_owned).collect();
        match fault {
            Fault::ExtraLines(n) => {
                let filler = lines.first().cloned().unwrap_or_else(|| "SCS".into());
                lines.extend(std::iter::repeat(filler).take(*n));
            }
            Fault::MissingLines(n) => lines.truncate(lines.len().saturating_sub(*n)),
            Fault::UnknownLabel { line, text } => {
                if let Some(l) = lines.get_mut(line.saturating_sub(1)) {
                    *l = match (self.variant, l.rfind(" - ")) {
                        (Variant::Bracketed, Some(at)) => format!("{} - {text}", &l[..at]),
                        _ => text.clone(),
                    };
                }
            }
            Fault::BlankLines => {
                lines = lines.into_iter().flat_map(|l| [l, String::new()]).collect();
            }
            Fault::Delay(d) => thread::sleep(*d),
            Fault::FirstCallOnly(inner) => {
                if call == 0 {
                    return self.apply(answer, inner, call);
                }
            }
        }
        lines.join("\n")
    }
}

impl ChatBackend for MockBackend {
    fn describe(&self) -> String {
        "mock".into()
    }

    fn complete(&self, prompt: &str) -> Result<Completion, LlmError> {
        let (answer, faults) = self
            .answers
            .get(prompt)
            .or_else(|| self.answers.get(""))
            .ok_or_else(|| LlmError::TransportError {
                attempts: 1,
                message: "mock has no answer for this prompt".into(),
            })?;
        let call = {
            let mut calls = self.calls.lock().expect("mock lock");
            let n = calls.entry(prompt.to_owned()).or_insert(0);
            *n += 1;
            *n - 1
        };
        let mut text = answer.clone();
        for fault in faults {
            text = self.apply(&text, fault, call);
        }
        Ok(Completion { text, retries: 0 })
    }
}
