//! Command line and environment configuration.

use std::fmt;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

#[derive(Debug, Parser)]
#[command(name = "freetext", version, about = "Criteria-aware feedback service for free-text answers")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the HTTP API.
    Serve(ServiceConfig),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StorageDriver {
    Memory,
    File,
}

impl StorageDriver {
    pub fn as_str(self) -> &'static str {
        match self {
            StorageDriver::Memory => "memory",
            StorageDriver::File => "file",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProviderKind {
    /// Canned replies from a JSON script file.
    Scripted,
    /// An OpenAI-style chat completions endpoint.
    Http,
}

/// Every field is settable as `--<kebab-name>` or `FREETEXT_<UPPER_SNAKE>`;
/// flags win over the environment.
#[derive(Clone, Args)]
pub struct ServiceConfig {
    #[arg(long, env = "FREETEXT_PORT", default_value_t = 8080)]
    pub port: u16,

    #[arg(long, env = "FREETEXT_HOST", default_value = "127.0.0.1")]
    pub host: String,

    /// Bearer token for instructor routes.
    #[arg(long, env = "FREETEXT_API_TOKEN", hide_env_values = true)]
    pub api_token: String,

    #[arg(long, env = "FREETEXT_STORAGE_DRIVER", value_enum, default_value = "memory")]
    pub storage_driver: StorageDriver,

    /// Store document path; required by the file driver.
    #[arg(long, env = "FREETEXT_STORAGE_PATH")]
    pub storage_path: Option<PathBuf>,

    #[arg(long, env = "FREETEXT_PROVIDER", value_enum, default_value = "scripted")]
    pub provider: ProviderKind,

    #[arg(long, env = "FREETEXT_PROVIDER_ENDPOINT")]
    pub provider_endpoint: Option<String>,

    #[arg(long, env = "FREETEXT_PROVIDER_MODEL")]
    pub provider_model: Option<String>,

    #[arg(long, env = "FREETEXT_PROVIDER_KEY", hide_env_values = true)]
    pub provider_key: Option<String>,

    /// Script table for the scripted provider.
    #[arg(long, env = "FREETEXT_SCRIPT_PATH")]
    pub script_path: Option<PathBuf>,

    /// Separate model for evaluation, rewriting and criteria generation.
    #[arg(long, env = "FREETEXT_EVALUATOR_MODEL")]
    pub evaluator_model: Option<String>,

    /// Directory of `<name>.prompt` files overriding the built-in templates.
    #[arg(long, env = "FREETEXT_TEMPLATE_DIR")]
    pub template_dir: Option<PathBuf>,

    #[arg(
        long,
        env = "FREETEXT_PERSIST_RESPONSES",
        default_value_t = false,
        action = clap::ArgAction::Set,
        num_args = 0..=1,
        default_missing_value = "true"
    )]
    pub persist_responses: bool,

    #[arg(long, env = "FREETEXT_RESPONSE_CHAR_CAP", default_value_t = 5_000)]
    pub response_char_cap: usize,

    #[arg(long, env = "FREETEXT_MAX_ROUNDS", default_value_t = 3)]
    pub max_rounds: u32,
}

impl fmt::Debug for ServiceConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ServiceConfig")
            .field("port", &self.port)
            .field("host", &self.host)
            .field("api_token", &"<redacted>")
            .field("storage_driver", &self.storage_driver)
            .field("storage_path", &self.storage_path)
            .field("provider", &self.provider)
            .field("provider_endpoint", &self.provider_endpoint)
            .field("provider_model", &self.provider_model)
            .field("provider_key", &self.provider_key.as_ref().map(|_| "<redacted>"))
            .field("script_path", &self.script_path)
            .field("evaluator_model", &self.evaluator_model)
            .field("template_dir", &self.template_dir)
            .field("persist_responses", &self.persist_responses)
            .field("response_char_cap", &self.response_char_cap)
            .field("max_rounds", &self.max_rounds)
            .finish()
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("api_token must not be empty")]
    EmptyToken,
    #[error("{0} is required when {1}")]
    Missing(&'static str, &'static str),
    #[error("{0} must be at least 1")]
    NotPositive(&'static str),
    #[error("cannot open store: {0}")]
    Store(#[from] freetext_core::StoreError),
    #[error("cannot load script {path}: {message}")]
    Script { path: String, message: String },
    #[error("cannot load templates: {0}")]
    Templates(#[from] freetext_core::prompt::TemplateError),
}

impl ServiceConfig {
    /// A config with defaults and the given token, for embedding and tests.
    pub fn with_token(api_token: impl Into<String>) -> Self {
        Self {
            port: 8080,
            host: "127.0.0.1".into(),
            api_token: api_token.into(),
            storage_driver: StorageDriver::Memory,
            storage_path: None,
            provider: ProviderKind::Scripted,
            provider_endpoint: None,
            provider_model: None,
            provider_key: None,
            script_path: None,
            evaluator_model: None,
            template_dir: None,
            persist_responses: false,
            response_char_cap: 5_000,
            max_rounds: 3,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.api_token.trim().is_empty() {
            return Err(ConfigError::EmptyToken);
        }
        if self.storage_driver == StorageDriver::File && self.storage_path.is_none() {
            return Err(ConfigError::Missing("storage_path", "storage_driver is file"));
        }
        match self.provider {
            ProviderKind::Scripted if self.script_path.is_none() => {
                return Err(ConfigError::Missing("script_path", "provider is scripted"))
            }
            ProviderKind::Http if self.provider_endpoint.is_none() => {
                return Err(ConfigError::Missing("provider_endpoint", "provider is http"))
            }
            ProviderKind::Http if self.provider_model.is_none() => {
                return Err(ConfigError::Missing("provider_model", "provider is http"))
            }
            _ => {}
        }
        if self.response_char_cap == 0 {
            return Err(ConfigError::NotPositive("response_char_cap"));
        }
        if self.max_rounds == 0 {
            return Err(ConfigError::NotPositive("max_rounds"));
        }
        Ok(())
    }
}
