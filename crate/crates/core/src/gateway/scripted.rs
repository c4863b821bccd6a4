//! Deterministic provider that answers from a table of canned replies.

use std::path::Path;
use std::sync::Mutex;
use std::time::Duration;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};

use super::{GenerationParams, LlmProvider, ProviderError};
use crate::prompt::PromptPayload;

pub const SCRIPTED_PROVIDER_ID: &str = "scripted";

/// How a script entry recognises a payload.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Matcher {
    Fingerprint(String),
    /// Substring of any rendered segment.
    Contains(String),
    Template(String),
    Any,
}

impl Matcher {
    fn matches(&self, payload: &PromptPayload) -> bool {
        match self {
            Matcher::Fingerprint(f) => payload.fingerprint == *f,
            Matcher::Contains(s) => payload.contains(s),
            Matcher::Template(t) => payload.template_name == *t,
            Matcher::Any => true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptEntry {
    #[serde(rename = "match")]
    pub matcher: Matcher,
    pub reply: String,
    /// How many calls this entry may serve; unlimited when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub times: Option<usize>,
}

impl ScriptEntry {
    pub fn new(matcher: Matcher, reply: impl Into<String>) -> Self {
        Self {
            matcher,
            reply: reply.into(),
            times: None,
        }
    }

    pub fn times(mut self, n: usize) -> Self {
        self.times = Some(n);
        self
    }
}

/// Ordered canned replies.
///
/// Lenient tables answer with the first live matching entry and reply with an
/// empty string on a miss. Strict tables require exactly one live match and
/// fail otherwise. An entry is live until it has served `times` calls.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptTable {
    pub entries: Vec<ScriptEntry>,
    #[serde(default)]
    pub strict: bool,
}

impl ScriptTable {
    pub fn strict(entries: Vec<ScriptEntry>) -> Self {
        Self {
            entries,
            strict: true,
        }
    }

    pub fn lenient(entries: Vec<ScriptEntry>) -> Self {
        Self {
            entries,
            strict: false,
        }
    }

    pub fn load(path: &Path) -> Result<Self, std::io::Error> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
    }
}

/// One call served by a [`ScriptedProvider`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ServedCall {
    pub payload: PromptPayload,
    /// Index of the entry that answered; `None` for a lenient miss or an error.
    pub entry: Option<usize>,
    pub reply: Option<String>,
}

#[derive(Debug, Default)]
struct ScriptState {
    uses: Vec<usize>,
    transcript: Vec<ServedCall>,
}

#[derive(Debug)]
pub struct ScriptedProvider {
    table: ScriptTable,
    delay: Option<Duration>,
    state: Mutex<ScriptState>,
}

pub fn make_scripted_provider(script: ScriptTable) -> ScriptedProvider {
    ScriptedProvider::new(script)
}

impl ScriptedProvider {
    pub fn new(table: ScriptTable) -> Self {
        let uses = vec![0; table.entries.len()];
        Self {
            table,
            delay: None,
            state: Mutex::new(ScriptState {
                uses,
                transcript: Vec::new(),
            }),
        }
    }

    /// Sleep before each reply, to imitate a slow backend.
    pub fn with_delay(mut self, delay: Duration) -> Self {
        self.delay = Some(delay);
        self
    }

    pub fn transcript(&self) -> Vec<ServedCall> {
        self.state.lock().unwrap().transcript.clone()
    }

    pub fn calls(&self) -> usize {
        self.state.lock().unwrap().transcript.len()
    }

    fn serve(&self, payload: &PromptPayload) -> Result<String, ProviderError> {
        let mut state = self.state.lock().unwrap();
        let live: Vec<usize> = self
            .table
            .entries
            .iter()
            .enumerate()
            .filter(|(i, e)| e.times.is_none_or(|n| state.uses[*i] < n) && e.matcher.matches(payload))
            .map(|(i, _)| i)
            .collect();

        let outcome = match (self.table.strict, live.as_slice()) {
            (_, [only]) | (false, [only, ..]) => Ok(Some(*only)),
            (true, []) => Err(ProviderError::ScriptMiss {
                template: payload.template_name.clone(),
                fingerprint: payload.fingerprint.clone(),
            }),
            (true, many) => Err(ProviderError::ScriptAmbiguous {
                template: payload.template_name.clone(),
                count: many.len(),
            }),
            (false, []) => Ok(None),
        };

        let (entry, result) = match outcome {
            Ok(Some(i)) => {
                state.uses[i] += 1;
                (Some(i), Ok(self.table.entries[i].reply.clone()))
            }
            Ok(None) => (None, Ok(String::new())),
            Err(e) => (None, Err(e)),
        };
        state.transcript.push(ServedCall {
            payload: payload.clone(),
            entry,
            reply: result.as_ref().ok().cloned(),
        });
        result
    }
}

#[async_trait]
impl LlmProvider for ScriptedProvider {
    fn id(&self) -> &str {
        SCRIPTED_PROVIDER_ID
    }

    async fn complete(
        &self,
        payload: &PromptPayload,
        _params: &GenerationParams,
    ) -> Result<String, ProviderError> {
        if let Some(delay) = self.delay {
            tokio::time::sleep(delay).await;
        }
        self.serve(payload)
    }
}
