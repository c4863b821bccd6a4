use std::sync::Arc;

use freetext_core::gateway::{ChatCompletionsProvider, ScriptTable, ScriptedProvider};
use freetext_core::{
    FileStore, FileStoreOptions, GenerationParams, Limits, LlmProvider, MemoryStore, QuestionStore,
    TemplateSet,
};
use sha2::{Digest, Sha256};
use subtle::ConstantTimeEq;

use crate::config::{ConfigError, ProviderKind, ServiceConfig, StorageDriver};

/// Shared, read-only handler state. All mutation goes through the store.
#[derive(Clone)]
pub struct AppState {
    pub store: Arc<dyn QuestionStore>,
    pub provider: Arc<dyn LlmProvider>,
    pub evaluator: Option<Arc<dyn LlmProvider>>,
    pub templates: Arc<TemplateSet>,
    pub limits: Limits,
    pub params: GenerationParams,
    pub max_rounds: u32,
    token_digest: [u8; 32],
}

fn digest(token: &str) -> [u8; 32] {
    Sha256::digest(token.as_bytes()).into()
}

impl AppState {
    pub fn new(store: Arc<dyn QuestionStore>, provider: Arc<dyn LlmProvider>, api_token: &str) -> Self {
        Self {
            store,
            provider,
            evaluator: None,
            templates: Arc::new(TemplateSet::builtin()),
            limits: Limits::default(),
            params: GenerationParams::default(),
            max_rounds: freetext_core::refinement::DEFAULT_MAX_ROUNDS,
            token_digest: digest(api_token),
        }
    }

    pub fn from_config(cfg: &ServiceConfig) -> Result<Self, ConfigError> {
        cfg.validate()?;
        let store: Arc<dyn QuestionStore> = match cfg.storage_driver {
            StorageDriver::Memory => Arc::new(MemoryStore::new(cfg.persist_responses)),
            StorageDriver::File => {
                let path = cfg.storage_path.clone().expect("checked by validate");
                Arc::new(FileStore::open(
                    path,
                    FileStoreOptions {
                        persist_responses: cfg.persist_responses,
                        ..FileStoreOptions::default()
                    },
                )?)
            }
        };

        let (provider, evaluator): (Arc<dyn LlmProvider>, Option<Arc<dyn LlmProvider>>) = match cfg.provider {
            ProviderKind::Scripted => {
                let path = cfg.script_path.as_ref().expect("checked by validate");
                let table = ScriptTable::load(path).map_err(|e| ConfigError::Script {
                    path: path.display().to_string(),
                    message: e.to_string(),
                })?;
                (Arc::new(ScriptedProvider::new(table)), None)
            }
            ProviderKind::Http => {
                let endpoint = cfg.provider_endpoint.clone().expect("checked by validate");
                let model = cfg.provider_model.clone().expect("checked by validate");
                let evaluator = cfg.evaluator_model.as_ref().map(|m| {
                    Arc::new(ChatCompletionsProvider::new(
                        endpoint.clone(),
                        m.clone(),
                        cfg.provider_key.clone(),
                    )) as Arc<dyn LlmProvider>
                });
                let provider = Arc::new(ChatCompletionsProvider::new(endpoint, model, cfg.provider_key.clone()));
                (provider, evaluator)
            }
        };

        let templates = match &cfg.template_dir {
            Some(dir) => TemplateSet::with_overrides(dir)?,
            None => TemplateSet::builtin(),
        };

        let mut state = Self::new(store, provider, &cfg.api_token);
        state.evaluator = evaluator;
        state.templates = Arc::new(templates);
        state.limits.max_response_chars = cfg.response_char_cap;
        state.max_rounds = cfg.max_rounds;
        Ok(state)
    }

    /// Constant-time comparison of SHA-256 digests, so neither the token's
    /// content nor its length leaks through timing.
    pub fn token_matches(&self, presented: &str) -> bool {
        bool::from(digest(presented).ct_eq(&self.token_digest))
    }

    pub fn evaluator(&self) -> &dyn LlmProvider {
        self.evaluator.as_deref().unwrap_or(self.provider.as_ref())
    }
}
