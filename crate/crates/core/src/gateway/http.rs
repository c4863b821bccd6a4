//! Adapter for HTTP backends that speak the chat-completions wire format:
//! `POST {endpoint}` with `{"model", "messages": [{"role", "content"}], "temperature"}`
//! and an answer at `choices[0].message.content`.

use std::fmt;

use async_trait::async_trait;
use serde::Serialize;
use serde_json::Value;

use super::{GenerationParams, LlmProvider, ProviderError};
use crate::prompt::{PromptPayload, Role};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub(crate) struct ChatMessage {
    pub role: &'static str,
    pub content: String,
}

/// Evaluator material goes in the system channel; student material is the
/// user turn. Adjacent segments with the same wire role are merged.
pub(crate) fn to_messages(payload: &PromptPayload) -> Vec<ChatMessage> {
    let mut messages: Vec<ChatMessage> = Vec::new();
    for segment in &payload.segments {
        let role = match segment.role {
            Role::System | Role::Evaluator => "system",
            Role::Student => "user",
        };
        match messages.last_mut() {
            Some(last) if last.role == role => {
                last.content.push_str("\n\n");
                last.content.push_str(&segment.text);
            }
            _ => messages.push(ChatMessage {
                role,
                content: segment.text.clone(),
            }),
        }
    }
    messages
}

pub struct ChatCompletionsProvider {
    id: String,
    endpoint: String,
    model: String,
    api_key: Option<String>,
    client: reqwest::Client,
}

impl fmt::Debug for ChatCompletionsProvider {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ChatCompletionsProvider")
            .field("endpoint", &self.endpoint)
            .field("model", &self.model)
            .field("api_key", &self.api_key.as_ref().map(|_| "<redacted>"))
            .finish()
    }
}

impl ChatCompletionsProvider {
    pub fn new(endpoint: impl Into<String>, model: impl Into<String>, api_key: Option<String>) -> Self {
        let model = model.into();
        Self {
            id: format!("http:{model}"),
            endpoint: endpoint.into(),
            model,
            api_key: api_key.filter(|k| !k.is_empty()),
            client: reqwest::Client::new(),
        }
    }
}

fn extract_content(body: &Value) -> Result<String, ProviderError> {
    let message = body
        .pointer("/choices/0/message")
        .ok_or_else(|| ProviderError::InvalidResponse("no choices[0].message".into()))?;
    if let Some(refusal) = message.get("refusal").and_then(Value::as_str) {
        if !refusal.is_empty() {
            return Err(ProviderError::Refused(refusal.to_string()));
        }
    }
    message
        .get("content")
        .and_then(Value::as_str)
        .map(String::from)
        .ok_or_else(|| ProviderError::InvalidResponse("message has no text content".into()))
}

#[async_trait]
impl LlmProvider for ChatCompletionsProvider {
    fn id(&self) -> &str {
        &self.id
    }

    async fn complete(
        &self,
        payload: &PromptPayload,
        params: &GenerationParams,
    ) -> Result<String, ProviderError> {
        let body = serde_json::json!({
            "model": self.model,
            "messages": to_messages(payload),
            "temperature": params.temperature,
        });
        let mut request = self.client.post(&self.endpoint).json(&body);
        if let Some(key) = &self.api_key {
            request = request.bearer_auth(key);
        }
        let response = request
            .send()
            .await
            .map_err(|e| ProviderError::Transport(e.without_url().to_string()))?;
        let status = response.status();
        let text = response
            .text()
            .await
            .map_err(|e| ProviderError::Transport(e.without_url().to_string()))?;
        if status.is_server_error() || status.as_u16() == 408 || status.as_u16() == 429 {
            return Err(ProviderError::Transport(format!("status {status}")));
        }
        if !status.is_success() {
            let message: String = text.chars().take(200).collect();
            return Err(ProviderError::Rejected {
                status: status.as_u16(),
                message,
            });
        }
        let value: Value =
            serde_json::from_str(&text).map_err(|e| ProviderError::InvalidResponse(e.to_string()))?;
        extract_content(&value)
    }
}
