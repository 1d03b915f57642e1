//! Access to the generator, planner and test-writer roles.
//!
//! Every outbound request, including retries and transport failures, leaves
//! exactly one [`CostRecord`] in the caller's [`CallLog`].

pub mod backend;
pub mod http;
pub mod parse;
pub mod prompt;
pub mod pysrc;
pub mod scripted;

use std::fmt;
use std::sync::Arc;
use std::time::Duration;

use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use backend::{estimate_tokens, ChatBackend, ChatMessage, ChatRequest, ChatResponse, MessageRole, TransportError, Usage};
pub use http::{EndpointConfig, HttpBackend};
pub use parse::{extract_stubs, last_code_block, parse_generation, parse_plan, ParseError, Stub};
pub use prompt::{PromptVars, Template};
pub use scripted::{ScriptedBackend, ScriptedTranscript, ScriptedTurn, Strictness};

use crate::harness::pricing::{PricingError, PricingTable};
use crate::policy::{FunctionImpl, HelperSet, PlanResult, ProblemSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoleKind {
    Generator,
    Planner,
    TestWriter,
}

impl RoleKind {
    pub fn as_str(self) -> &'static str {
        match self {
            RoleKind::Generator => "generator",
            RoleKind::Planner => "planner",
            RoleKind::TestWriter => "test_writer",
        }
    }

    pub fn default_temperature(self) -> f64 {
        match self {
            RoleKind::Generator => 0.8,
            RoleKind::Planner | RoleKind::TestWriter => 0.2,
        }
    }

    pub fn default_samples(self) -> u32 {
        match self {
            RoleKind::Generator => 5,
            RoleKind::Planner | RoleKind::TestWriter => 1,
        }
    }
}

impl fmt::Display for RoleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

pub const DEFAULT_MAX_RETRIES: u32 = 3;

/// A model bound to one role.
#[derive(Clone)]
pub struct ModelRole {
    pub kind: RoleKind,
    pub model: String,
    pub backend: Arc<dyn ChatBackend>,
    pub temperature: f64,
    pub n_samples: u32,
    /// Total attempts allowed per sample when the output cannot be parsed.
    pub max_retries: u32,
    /// Text prepended to the system message (e.g. `/no_think`).
    pub extra_prefix: Option<String>,
}

impl fmt::Debug for ModelRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ModelRole")
            .field("kind", &self.kind)
            .field("model", &self.model)
            .field("temperature", &self.temperature)
            .field("n_samples", &self.n_samples)
            .field("max_retries", &self.max_retries)
            .field("extra_prefix", &self.extra_prefix)
            .finish_non_exhaustive()
    }
}

impl ModelRole {
    /// A role with the default sampling settings for `kind`.
    pub fn new(kind: RoleKind, model: impl Into<String>, backend: Arc<dyn ChatBackend>) -> Self {
        Self {
            kind,
            model: model.into(),
            backend,
            temperature: kind.default_temperature(),
            n_samples: kind.default_samples(),
            max_retries: DEFAULT_MAX_RETRIES,
            extra_prefix: None,
        }
    }

    pub fn with_temperature(mut self, temperature: f64) -> Self {
        self.temperature = temperature;
        self
    }

    pub fn with_samples(mut self, n: u32) -> Self {
        self.n_samples = n;
        self
    }

    pub fn with_max_retries(mut self, max_retries: u32) -> Self {
        self.max_retries = max_retries;
        self
    }

    pub fn with_extra_prefix(mut self, prefix: impl Into<String>) -> Self {
        self.extra_prefix = Some(prefix.into());
        self
    }

    fn attempts(&self) -> u32 {
        self.max_retries.max(1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CallStatus {
    Ok,
    TransportError,
}

/// Accounting for a single outbound request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostRecord {
    pub role: RoleKind,
    pub model: String,
    /// `<role>:<problem id>` of the request.
    pub fingerprint: String,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    #[serde(with = "rust_decimal::serde::str")]
    pub usd: Decimal,
    pub wall_ms: u64,
    /// Token counts were estimated from byte lengths.
    #[serde(default)]
    pub estimated: bool,
    pub status: CallStatus,
}

/// A rendered prompt, kept for the leakage audit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptLog {
    pub fingerprint: String,
    pub text: String,
}

/// Per-solve sink for cost records and prompts.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CallLog {
    pub records: Vec<CostRecord>,
    pub prompts: Vec<PromptLog>,
}

impl CallLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn total_usd(&self) -> Decimal {
        self.records.iter().map(|r| r.usd).sum()
    }

    pub fn calls(&self, role: RoleKind) -> usize {
        self.records.iter().filter(|r| r.role == role).count()
    }
}

/// Capped exponential backoff for retryable transport faults.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Backoff {
    pub base_ms: u64,
    pub factor: f64,
    pub cap_ms: u64,
    /// Total attempts, including the first.
    pub max_attempts: u32,
}

impl Default for Backoff {
    fn default() -> Self {
        Self { base_ms: 1000, factor: 2.0, cap_ms: 30_000, max_attempts: 6 }
    }
}

impl Backoff {
    /// Delay before retry number `retry` (1-based).
    pub fn delay(&self, retry: u32) -> Duration {
        let ms = self.base_ms as f64 * self.factor.powi(retry.saturating_sub(1) as i32);
        Duration::from_millis(ms.min(self.cap_ms as f64) as u64)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GatewayError {
    #[error("sample {sample} unparsable after {attempts} attempts: {last}")]
    ParseFailure { sample: usize, attempts: u32, last: ParseError },
    #[error("{error} after {attempts} attempts")]
    Transport { error: TransportError, attempts: u32 },
    #[error("test writer produced no output after {attempts} attempts")]
    EmptyOutput { attempts: u32 },
    #[error("role {actual} used where {expected} is required")]
    WrongRole { expected: RoleKind, actual: RoleKind },
    #[error(transparent)]
    Pricing(#[from] PricingError),
}

/// Stateless request orchestration shared by all solves.
#[derive(Debug, Clone, Default)]
pub struct ModelGateway {
    pub backoff: Backoff,
    pricing: Option<Arc<PricingTable>>,
}

impl ModelGateway {
    pub fn new() -> Self {
        Self::default()
    }

    /// Prices every record against `pricing`; unknown models become errors.
    pub fn with_pricing(mut self, pricing: PricingTable) -> Self {
        self.pricing = Some(Arc::new(pricing));
        self
    }

    pub fn with_backoff(mut self, backoff: Backoff) -> Self {
        self.backoff = backoff;
        self
    }

    pub fn pricing(&self) -> Option<&PricingTable> {
        self.pricing.as_deref()
    }

    fn price(&self, model: &str, prompt: u64, completion: u64) -> Result<Decimal, GatewayError> {
        match &self.pricing {
            Some(table) => Ok(table.price(model, prompt, completion)?),
            None => Ok(Decimal::ZERO),
        }
    }

    /// One logical call with transport retries; each attempt is recorded.
    fn call(
        &self,
        role: &ModelRole,
        messages: &[ChatMessage],
        n: u32,
        fingerprint: &str,
        log: &mut CallLog,
    ) -> Result<Vec<String>, GatewayError> {
        let request = ChatRequest {
            model: role.model.clone(),
            messages: messages.to_vec(),
            temperature: role.temperature,
            n,
            fingerprint: fingerprint.to_string(),
        };
        log.prompts.push(PromptLog { fingerprint: fingerprint.to_string(), text: request.transcript() });
        let max_attempts = self.backoff.max_attempts.max(1);
        let mut attempt = 0;
        loop {
            attempt += 1;
            match role.backend.complete(&request) {
                Ok(response) => {
                    let (prompt_tokens, completion_tokens, estimated) = match response.usage {
                        Some(u) => (u.prompt_tokens, u.completion_tokens, false),
                        None => (
                            estimate_tokens(request.prompt_bytes()),
                            response.choices.iter().map(|c| estimate_tokens(c.len())).sum(),
                            true,
                        ),
                    };
                    let usd = self.price(&role.model, prompt_tokens, completion_tokens)?;
                    log.records.push(CostRecord {
                        role: role.kind,
                        model: role.model.clone(),
                        fingerprint: fingerprint.to_string(),
                        prompt_tokens,
                        completion_tokens,
                        usd,
                        wall_ms: response.wall_ms,
                        estimated,
                        status: CallStatus::Ok,
                    });
                    let mut choices = response.choices;
                    choices.resize(n as usize, String::new());
                    return Ok(choices);
                }
                Err(error) => {
                    log.records.push(CostRecord {
                        role: role.kind,
                        model: role.model.clone(),
                        fingerprint: fingerprint.to_string(),
                        prompt_tokens: 0,
                        completion_tokens: 0,
                        usd: Decimal::ZERO,
                        wall_ms: 0,
                        estimated: false,
                        status: CallStatus::TransportError,
                    });
                    if !error.retryable || attempt >= max_attempts {
                        return Err(GatewayError::Transport { error, attempts: attempt });
                    }
                    std::thread::sleep(self.backoff.delay(attempt));
                }
            }
        }
    }

    fn check_role(role: &ModelRole, expected: RoleKind) -> Result<(), GatewayError> {
        if role.kind == expected {
            Ok(())
        } else {
            Err(GatewayError::WrongRole { expected, actual: role.kind })
        }
    }

    /// Current code shown to the generator and planner: helpers, then the
    /// stub of the target.
    pub fn current_code(problem: &ProblemSpec, helpers: &HelperSet) -> String {
        if helpers.is_empty() {
            problem.stub_source()
        } else {
            format!("{}\n{}", helpers.render(), problem.stub_source())
        }
    }

    fn render(template: &Template, role: &ModelRole, problem: &ProblemSpec, prev_code: &str) -> Vec<ChatMessage> {
        let vars = PromptVars { prev_code: prev_code.trim_end(), cur_func_name: problem.name(), cur_func_doc: &problem.description };
        template.render(&vars, role.extra_prefix.as_deref())
    }

    pub fn fingerprint(role: RoleKind, problem: &ProblemSpec) -> String {
        format!("{}:{}", role, problem.id)
    }

    /// Requests `n_samples` candidates. The outer error is a transport
    /// failure; each inner result is one sample after its parse retries.
    pub fn generate(
        &self,
        problem: &ProblemSpec,
        helpers: &HelperSet,
        role: &ModelRole,
        log: &mut CallLog,
    ) -> Result<Vec<Result<FunctionImpl, GatewayError>>, GatewayError> {
        Self::check_role(role, RoleKind::Generator)?;
        let messages = Self::render(&Template::generate(), role, problem, &Self::current_code(problem, helpers));
        let fingerprint = Self::fingerprint(role.kind, problem);
        let n = role.n_samples.max(1);
        let first = self.call(role, &messages, n, &fingerprint, log)?;
        let mut samples = Vec::with_capacity(n as usize);
        for (index, text) in first.into_iter().enumerate() {
            let mut result = parse_generation(&text, problem, helpers);
            let mut attempts = 1;
            while result.is_err() && attempts < role.attempts() {
                attempts += 1;
                let retry = self.call(role, &messages, 1, &fingerprint, log)?;
                result = parse_generation(&retry[0], problem, helpers);
            }
            samples.push(result.map_err(|last| GatewayError::ParseFailure { sample: index, attempts, last }));
        }
        Ok(samples)
    }

    /// Asks the planner for a decomposition.
    pub fn decompose(
        &self,
        problem: &ProblemSpec,
        helpers: &HelperSet,
        role: &ModelRole,
        log: &mut CallLog,
    ) -> Result<PlanResult, GatewayError> {
        Self::check_role(role, RoleKind::Planner)?;
        let messages = Self::render(&Template::plan(), role, problem, &Self::current_code(problem, helpers));
        let fingerprint = Self::fingerprint(role.kind, problem);
        let mut attempts = 0;
        let mut docstring_retry_used = false;
        loop {
            attempts += 1;
            let text = self.call(role, &messages, 1, &fingerprint, log)?.remove(0);
            let error = match parse_plan(&text, problem, helpers, false) {
                Ok(plan) => return Ok(plan),
                Err(ParseError::StubWithoutDocstring(_)) if docstring_retry_used => {
                    return parse_plan(&text, problem, helpers, true)
                        .map_err(|last| GatewayError::ParseFailure { sample: 0, attempts, last });
                }
                Err(ParseError::StubWithoutDocstring(name)) => {
                    docstring_retry_used = true;
                    if attempts >= role.attempts() {
                        // the one docstring retry is owed even on the last attempt
                        attempts -= 1;
                    }
                    ParseError::StubWithoutDocstring(name)
                }
                Err(other) => other,
            };
            if attempts >= role.attempts() {
                return Err(GatewayError::ParseFailure { sample: 0, attempts, last: error });
            }
        }
    }

    /// Raw assertion text from the test writer. A `None` role means
    /// generated tests are disabled.
    pub fn write_tests(
        &self,
        problem: &ProblemSpec,
        role: Option<&ModelRole>,
        log: &mut CallLog,
    ) -> Result<String, GatewayError> {
        let Some(role) = role else {
            return Err(GatewayError::EmptyOutput { attempts: 0 });
        };
        Self::check_role(role, RoleKind::TestWriter)?;
        let messages = Self::render(&Template::tests(), role, problem, &problem.stub_source());
        let fingerprint = Self::fingerprint(role.kind, problem);
        for _ in 0..role.attempts() {
            let text = self.call(role, &messages, 1, &fingerprint, log)?.remove(0);
            if !text.trim().is_empty() {
                return Ok(text);
            }
        }
        Err(GatewayError::EmptyOutput { attempts: role.attempts() })
    }
}
