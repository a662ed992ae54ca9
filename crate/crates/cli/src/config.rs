use std::path::{Path, PathBuf};

use facts_core::workflow::Demonstration;
use facts_core::WorkflowConfig;
use serde::Deserialize;

use crate::error::CliError;

pub const DEFAULT_ENDPOINT: &str = "https://openrouter.ai/api/v1/chat/completions";
pub const DEFAULT_API_KEY: &str = "${OPENROUTER_API_KEY}";
pub const DEFAULT_AGENT: &str = "gpt-4o";
pub const DEFAULT_COUNCIL: [&str; 3] = ["gpt-4o-mini", "claude-sonnet-4", "deepseek-v3"];
pub const DEFAULT_STORE: &str = ".facts-store";

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Live,
    Scripted,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendConfig {
    #[serde(default)]
    pub mode: Mode,
    pub script: Option<PathBuf>,
}

fn default_endpoint() -> String {
    DEFAULT_ENDPOINT.to_string()
}

fn default_api_key() -> String {
    DEFAULT_API_KEY.to_string()
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// Display id; defaults to the model id.
    pub id: Option<String>,
    pub model: String,
    #[serde(default = "default_endpoint")]
    pub endpoint: String,
    /// May reference environment variables as `${NAME}`.
    #[serde(default = "default_api_key")]
    pub api_key: String,
}

impl ModelConfig {
    pub fn named(model: &str) -> Self {
        Self {
            id: None,
            model: model.to_string(),
            endpoint: default_endpoint(),
            api_key: default_api_key(),
        }
    }

    pub fn id(&self) -> &str {
        self.id.as_deref().unwrap_or(&self.model)
    }
}

fn default_agent() -> ModelConfig {
    ModelConfig::named(DEFAULT_AGENT)
}

fn default_council() -> Vec<ModelConfig> {
    DEFAULT_COUNCIL.iter().map(|m| ModelConfig::named(m)).collect()
}

fn default_timeout() -> u64 {
    120
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub backend: BackendConfig,
    #[serde(default = "default_agent")]
    pub agent: ModelConfig,
    #[serde(default = "default_council")]
    pub council: Vec<ModelConfig>,
    #[serde(default)]
    pub workflow: WorkflowConfig,
    pub store: Option<PathBuf>,
    /// JSON array of `{schema_text, query, summary}` demonstrations.
    pub demos: Option<PathBuf>,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            backend: BackendConfig::default(),
            agent: default_agent(),
            council: default_council(),
            workflow: WorkflowConfig::default(),
            store: None,
            demos: None,
            timeout_secs: default_timeout(),
        }
    }
}

/// Flag values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub store: Option<PathBuf>,
    pub script: Option<PathBuf>,
}

impl RunConfig {
    /// Parses TOML text. Relative paths resolve against `base`.
    pub fn from_toml(text: &str, base: &Path) -> Result<Self, CliError> {
        let mut cfg: RunConfig =
            toml::from_str(text).map_err(|e| CliError::Config(format!("invalid config: {e}")))?;
        let rebase = |p: &mut Option<PathBuf>| {
            if let Some(path) = p.as_mut() {
                if path.is_relative() {
                    *path = base.join(&*path);
                }
            }
        };
        rebase(&mut cfg.backend.script);
        rebase(&mut cfg.store);
        rebase(&mut cfg.demos);
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml(&text, path.parent().unwrap_or(Path::new(".")))
    }

    /// File (or defaults), then flags, then validation and demo loading.
    pub fn resolve(path: Option<&Path>, overrides: &Overrides) -> Result<Self, CliError> {
        let mut cfg = match path {
            Some(p) => Self::load(p)?,
            None => Self::default(),
        };
        if let Some(store) = &overrides.store {
            cfg.store = Some(store.clone());
        }
        if let Some(script) = &overrides.script {
            cfg.backend.mode = Mode::Scripted;
            cfg.backend.script = Some(script.clone());
        }
        if let Some(demos) = &cfg.demos {
            let text = std::fs::read_to_string(demos).map_err(|e| {
                CliError::Config(format!("cannot read demos {}: {e}", demos.display()))
            })?;
            cfg.workflow.demos = serde_json::from_str::<Vec<Demonstration>>(&text)
                .map_err(|e| CliError::Config(format!("invalid demos {}: {e}", demos.display())))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.council.is_empty() {
            return Err(CliError::Config("the council needs at least one member".into()));
        }
        self.workflow
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        if self.backend.mode == Mode::Scripted && self.backend.script.is_none() {
            return Err(CliError::Config(
                "scripted mode needs a script path (--script or backend.script)".into(),
            ));
        }
        Ok(())
    }

    /// Live mode only: every model must resolve to a non-empty key. Checked
    /// when a command actually needs a model, so `apply` runs without keys.
    pub fn check_credentials(&self) -> Result<(), CliError> {
        if self.backend.mode == Mode::Scripted {
            return Ok(());
        }
        for m in std::iter::once(&self.agent).chain(&self.council) {
            let key = interpolate_secret(&m.api_key)?;
            if key.trim().is_empty() {
                return Err(CliError::Config(format!(
                    "no credentials for model `{}`",
                    m.id()
                )));
            }
        }
        Ok(())
    }

    pub fn store_path(&self) -> PathBuf {
        self.store
            .clone()
            .unwrap_or_else(|| PathBuf::from(DEFAULT_STORE))
    }
}

/// Replaces every `${NAME}` with the environment variable `NAME`.
pub fn interpolate_secret(raw: &str) -> Result<String, CliError> {
    let mut out = String::new();
    let mut rest = raw;
    while let Some(start) = rest.find("${") {
        out.push_str(&rest[..start]);
        let after = &rest[start + 2..];
        let end = after
            .find('}')
            .ok_or_else(|| CliError::Config(format!("unterminated `${{` in `{raw}`")))?;
        let name = &after[..end];
        let value = std::env::var(name).map_err(|_| {
            CliError::Config(format!("environment variable `{name}` is not set"))
        })?;
        out.push_str(&value);
        rest = &after[end + 1..];
    }
    out.push_str(rest);
    Ok(out)
}
