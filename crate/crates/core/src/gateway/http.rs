//! OpenAI-compatible chat-completion client.

use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::sync::Semaphore;

use super::backend::{ChatBackend, ChatMessage, ChatRequest, ChatResponse, TransportError, Usage};

/// Where and how to reach an endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndpointConfig {
    pub base_url: String,
    #[serde(default = "default_path")]
    pub path: String,
    /// Name of the environment variable holding the bearer token.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub api_key_env: Option<String>,
    #[serde(default = "default_timeout_secs")]
    pub timeout_secs: u64,
    #[serde(default = "default_in_flight")]
    pub max_in_flight: usize,
    /// Minimum spacing between request starts, in milliseconds.
    #[serde(default)]
    pub min_interval_ms: u64,
    /// Sampling seed forwarded to providers that honor one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

fn default_path() -> String {
    "/v1/chat/completions".into()
}

fn default_timeout_secs() -> u64 {
    120
}

fn default_in_flight() -> usize {
    8
}

impl EndpointConfig {
    pub fn new(base_url: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into(),
            path: default_path(),
            api_key_env: None,
            timeout_secs: default_timeout_secs(),
            max_in_flight: default_in_flight(),
            min_interval_ms: 0,
            seed: None,
        }
    }

    pub fn url(&self) -> String {
        format!("{}{}", self.base_url.trim_end_matches('/'), self.path)
    }
}

#[derive(Serialize)]
struct WireRequest<'a> {
    model: &'a str,
    messages: &'a [ChatMessage],
    temperature: f64,
    n: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
}

#[derive(Deserialize)]
struct WireResponse {
    #[serde(default)]
    choices: Vec<WireChoice>,
    #[serde(default)]
    usage: Option<WireUsage>,
}

#[derive(Deserialize)]
struct WireChoice {
    message: WireMessage,
}

#[derive(Deserialize)]
struct WireMessage {
    #[serde(default)]
    content: Option<String>,
}

#[derive(Deserialize)]
struct WireUsage {
    #[serde(default)]
    prompt_tokens: Option<u64>,
    #[serde(default)]
    completion_tokens: Option<u64>,
}

pub struct HttpBackend {
    config: EndpointConfig,
    client: reqwest::blocking::Client,
    token: Option<String>,
    in_flight: Semaphore,
    last_start: Mutex<Option<Instant>>,
}

impl std::fmt::Debug for HttpBackend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HttpBackend").field("url", &self.config.url()).finish_non_exhaustive()
    }
}

impl HttpBackend {
    pub fn new(config: EndpointConfig) -> Result<Self, TransportError> {
        let token = match &config.api_key_env {
            Some(var) => Some(std::env::var(var).map_err(|_| {
                TransportError::fatal(format!("environment variable {var} is not set"))
            })?),
            None => None,
        };
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| TransportError::fatal(format!("building HTTP client: {e}")))?;
        let in_flight = Semaphore::new(config.max_in_flight);
        Ok(Self { config, client, token, in_flight, last_start: Mutex::new(None) })
    }

    fn pace(&self) {
        if self.config.min_interval_ms == 0 {
            return;
        }
        let interval = Duration::from_millis(self.config.min_interval_ms);
        let mut last = self.last_start.lock().expect("rate limiter lock");
        if let Some(prev) = *last {
            let elapsed = prev.elapsed();
            if elapsed < interval {
                std::thread::sleep(interval - elapsed);
            }
        }
        *last = Some(Instant::now());
    }
}

impl ChatBackend for HttpBackend {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, TransportError> {
        let _permit = self.in_flight.acquire();
        self.pace();
        let body = WireRequest {
            model: &request.model,
            messages: &request.messages,
            temperature: request.temperature,
            n: request.n,
            seed: self.config.seed,
        };
        let started = Instant::now();
        let mut builder = self.client.post(self.config.url()).json(&body);
        if let Some(token) = &self.token {
            builder = builder.bearer_auth(token);
        }
        let response = builder.send().map_err(|e| TransportError::retryable(e.to_string()))?;
        let status = response.status();
        if !status.is_success() {
            let text = response.text().unwrap_or_default();
            let message = format!("HTTP {status}: {}", text.chars().take(300).collect::<String>());
            return Err(if status.as_u16() == 429 || status.is_server_error() {
                TransportError::retryable(message)
            } else {
                TransportError::fatal(message)
            });
        }
        let wire: WireResponse = response
            .json()
            .map_err(|e| TransportError::retryable(format!("decoding response: {e}")))?;
        let wall_ms = started.elapsed().as_millis() as u64;
        let usage = wire.usage.and_then(|u| match (u.prompt_tokens, u.completion_tokens) {
            (Some(prompt_tokens), Some(completion_tokens)) => Some(Usage { prompt_tokens, completion_tokens }),
            _ => None,
        });
        Ok(ChatResponse {
            choices: wire.choices.into_iter().map(|c| c.message.content.unwrap_or_default()).collect(),
            usage,
            wall_ms,
        })
    }
}
