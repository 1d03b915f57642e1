//! Run configuration, read from TOML.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::pricing::{ModelPrice, PricingError, PricingTable};
use crate::gateway::scripted::TranscriptError;
use crate::gateway::{ChatBackend, EndpointConfig, HttpBackend, ModelRole, RoleKind, ScriptedBackend, ScriptedTranscript, Strictness};
use crate::policy::{PolicyConfig, Roles};
use crate::sandbox::{Executor, InProcessExecutor, InterpreterConfig, LimitsError, ProcessExecutor, ResourceLimits, SandboxError};

/// Which policy a run executes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Trial first, plan on verified failure.
    #[default]
    Pat,
    /// One low-temperature candidate, no planner, no generated tests.
    Standard,
    /// N candidates selected by generated tests, no planner.
    BestOfN,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Pat => "pat",
            Mode::Standard => "standard",
            Mode::BestOfN => "best_of_n",
        }
    }
}

pub const STANDARD_TEMPERATURE: f64 = 0.3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BackendConfig {
    Scripted { transcript: PathBuf },
    Http(EndpointConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoleConfig {
    pub model: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temperature: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_samples: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_retries: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extra_prefix: Option<String>,
    pub backend: BackendConfig,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RolesConfig {
    pub generator: Option<RoleConfig>,
    pub planner: Option<RoleConfig>,
    pub test_writer: Option<RoleConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SandboxKind {
    /// The bundled interpreter, inside this process.
    #[default]
    InProcess,
    /// One interpreter process per case.
    Process,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SandboxConfig {
    #[serde(default)]
    pub kind: SandboxKind,
    #[serde(flatten)]
    pub interpreter: InterpreterConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub mode: Mode,
    #[serde(default)]
    pub seed: u64,
    /// Upper bound on concurrent solves; the effective value is
    /// `min(concurrency, problems)`.
    #[serde(default = "default_concurrency")]
    pub concurrency: usize,
    #[serde(default)]
    pub policy: PolicyConfig,
    #[serde(default)]
    pub limits: ResourceLimits,
    #[serde(default)]
    pub sandbox: SandboxConfig,
    /// Start from the reference price table before applying `pricing`.
    #[serde(default = "yes")]
    pub reference_pricing: bool,
    #[serde(default)]
    pub pricing: BTreeMap<String, ModelPrice>,
    #[serde(default)]
    pub roles: RolesConfig,
    /// Relative paths are resolved against this directory.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_concurrency() -> usize {
    8
}

fn yes() -> bool {
    true
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("parsing {path}: {source}")]
    Toml { path: String, source: toml::de::Error },
    #[error("mode {mode} requires a {role} role")]
    MissingRole { mode: &'static str, role: &'static str },
    #[error(transparent)]
    Transcript(#[from] TranscriptError),
    #[error("endpoint: {0}")]
    Endpoint(String),
    #[error(transparent)]
    Pricing(#[from] PricingError),
    #[error(transparent)]
    Limits(#[from] LimitsError),
    #[error(transparent)]
    Sandbox(#[from] SandboxError),
    #[error("concurrency must be at least 1")]
    Concurrency,
}

/// Roles plus whether any of them replays an ordered transcript, which
/// forces sequential solving.
#[derive(Debug, Clone)]
pub struct BuiltRoles {
    pub roles: Roles,
    pub ordered: bool,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        let mut config: RunConfig =
            toml::from_str(&text).map_err(|source| ConfigError::Toml { path: path.display().to_string(), source })?;
        config.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(config)
    }

    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self, ConfigError> {
        let mut config: RunConfig =
            toml::from_str(text).map_err(|source| ConfigError::Toml { path: "<inline>".into(), source })?;
        config.base_dir = base_dir.to_path_buf();
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.limits.validate()?;
        self.pricing_table()?;
        if self.concurrency == 0 {
            return Err(ConfigError::Concurrency);
        }
        if self.roles.generator.is_none() {
            return Err(ConfigError::MissingRole { mode: self.mode.as_str(), role: "generator" });
        }
        if self.mode == Mode::Pat && self.roles.planner.is_none() {
            return Err(ConfigError::MissingRole { mode: self.mode.as_str(), role: "planner" });
        }
        Ok(())
    }

    pub fn pricing_table(&self) -> Result<PricingTable, ConfigError> {
        let mut table = if self.reference_pricing { PricingTable::reference() } else { PricingTable::new() };
        for (model, price) in &self.pricing {
            table.insert(model, price.input_usd_per_million, price.output_usd_per_million)?;
        }
        Ok(table)
    }

    fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }

    /// Instantiates the roles the mode uses. Roles sharing a transcript
    /// file share one scripted backend.
    pub fn build_roles(&self) -> Result<BuiltRoles, ConfigError> {
        self.validate()?;
        let mut scripted: BTreeMap<PathBuf, Arc<ScriptedBackend>> = BTreeMap::new();
        let mut ordered = false;
        let mut build = |kind: RoleKind, cfg: &RoleConfig| -> Result<ModelRole, ConfigError> {
            let backend: Arc<dyn ChatBackend> = match &cfg.backend {
                BackendConfig::Scripted { transcript } => {
                    let path = self.resolve(transcript);
                    if let Some(existing) = scripted.get(&path) {
                        existing.clone()
                    } else {
                        let t = ScriptedTranscript::load(&path)?;
                        ordered |= t.strictness == Strictness::Ordered;
                        let b = Arc::new(ScriptedBackend::new(&t));
                        scripted.insert(path, b.clone());
                        b
                    }
                }
                BackendConfig::Http(endpoint) => {
                    let mut endpoint = endpoint.clone();
                    endpoint.seed = endpoint.seed.or(Some(self.seed));
                    Arc::new(HttpBackend::new(endpoint).map_err(|e| ConfigError::Endpoint(e.message))?)
                }
            };
            let mut role = ModelRole::new(kind, cfg.model.clone(), backend);
            if let Some(t) = cfg.temperature {
                role = role.with_temperature(t);
            }
            if let Some(n) = cfg.n_samples {
                role = role.with_samples(n);
            }
            if let Some(r) = cfg.max_retries {
                role = role.with_max_retries(r);
            }
            if let Some(p) = &cfg.extra_prefix {
                role = role.with_extra_prefix(p.clone());
            }
            Ok(role)
        };
        let gen_cfg = self.roles.generator.as_ref().expect("validated");
        let mut generator = build(RoleKind::Generator, gen_cfg)?;
        let (planner, test_writer) = match self.mode {
            Mode::Standard => {
                generator = generator.with_samples(1).with_temperature(STANDARD_TEMPERATURE);
                (None, None)
            }
            Mode::BestOfN => (None, self.roles.test_writer.as_ref().map(|c| build(RoleKind::TestWriter, c)).transpose()?),
            Mode::Pat => (
                self.roles.planner.as_ref().map(|c| build(RoleKind::Planner, c)).transpose()?,
                self.roles.test_writer.as_ref().map(|c| build(RoleKind::TestWriter, c)).transpose()?,
            ),
        };
        Ok(BuiltRoles { roles: Roles { generator, planner, test_writer }, ordered })
    }

    pub fn build_executor(&self) -> Result<Box<dyn Executor>, ConfigError> {
        Ok(match self.sandbox.kind {
            SandboxKind::InProcess => match self.sandbox.interpreter.workers {
                Some(n) => Box::new(InProcessExecutor::new(n)),
                None => Box::new(InProcessExecutor::default()),
            },
            SandboxKind::Process => {
                let mut interp = self.sandbox.interpreter.clone();
                interp.interpreter = interp.interpreter.map(|p| self.resolve(&p));
                Box::new(ProcessExecutor::new(&interp)?)
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const PAT: &str = r#"
mode = "pat"
seed = 3

[policy]
max_depth = 2

[pricing]
tiny = { input_usd_per_million = "1.5", output_usd_per_million = "2" }

[roles.generator]
model = "tiny"
n_samples = 4
backend = { kind = "http", base_url = "http://127.0.0.1:9" }

[roles.planner]
model = "Qwen3-32B"
backend = { kind = "http", base_url = "http://127.0.0.1:9" }
"#;

    #[test]
    fn parses_and_applies_modes() {
        let config = RunConfig::from_toml(PAT, Path::new(".")).unwrap();
        assert_eq!(config.policy.max_depth, 2);
        assert_eq!(config.policy.max_plan_rounds, 4);
        assert!(config.pricing_table().unwrap().get("tiny").is_ok());
        assert!(config.pricing_table().unwrap().get("Qwen3-4B").is_ok());
        let built = config.build_roles().unwrap();
        assert_eq!(built.roles.generator.n_samples, 4);
        assert!(built.roles.planner.is_some() && built.roles.test_writer.is_none());

        let standard = RunConfig { mode: Mode::Standard, ..config.clone() };
        let built = standard.build_roles().unwrap();
        assert_eq!(built.roles.generator.n_samples, 1);
        assert_eq!(built.roles.generator.temperature, STANDARD_TEMPERATURE);
        assert!(built.roles.planner.is_none());

        let mut no_planner = config;
        no_planner.roles.planner = None;
        assert!(matches!(no_planner.validate(), Err(ConfigError::MissingRole { role: "planner", .. })));
    }

    #[test]
    fn rejects_unknown_keys() {
        assert!(RunConfig::from_toml("mood = \"pat\"\n", Path::new(".")).is_err());
    }
}
