use std::collections::HashMap;
use std::path::Path;
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use super::agents::AgentRole;

pub const LLM_ENDPOINT_ENV: &str = "LINKS_LLM_ENDPOINT";
pub const LLM_API_KEY_ENV: &str = "LINKS_LLM_API_KEY";
pub const LLM_MODEL_ENV: &str = "LINKS_LLM_MODEL";

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("backend configuration: {0}")]
    Config(String),
    #[error("backend transport: {0}")]
    Transport(String),
    #[error("backend protocol: {0}")]
    Protocol(String),
    #[error("mock script: {0}")]
    Script(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatMessage {
    /// `system`, `user` or `assistant`.
    pub role: String,
    pub content: String,
}

/// Everything a backend sees for one turn.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LlmRequest {
    pub role: AgentRole,
    /// 1-based step the reply will occupy.
    pub step: usize,
    pub system_prompt: String,
    pub messages: Vec<ChatMessage>,
}

pub trait LlmBackend: Send + Sync {
    fn complete(&self, request: &LlmRequest) -> Result<String, BackendError>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptEntry {
    pub role: AgentRole,
    pub step: usize,
    pub message: String,
}

/// Replays a script keyed by `(role, step)`. Unscripted turns get an empty reply.
///
/// Every request is kept so tests can inspect the prompts.
#[derive(Debug, Default)]
pub struct MockBackend {
    script: HashMap<(AgentRole, usize), String>,
    requests: Mutex<Vec<LlmRequest>>,
}

impl MockBackend {
    pub fn new(entries: Vec<ScriptEntry>) -> Result<Self, BackendError> {
        let mut script = HashMap::new();
        for e in entries {
            if script.insert((e.role, e.step), e.message).is_some() {
                return Err(BackendError::Script(format!("duplicate entry for {} at step {}", e.role, e.step)));
            }
        }
        Ok(MockBackend {
            script,
            requests: Mutex::default(),
        })
    }

    pub fn from_json(text: &str) -> Result<Self, BackendError> {
        let entries: Vec<ScriptEntry> = serde_json::from_str(text).map_err(|e| BackendError::Script(e.to_string()))?;
        Self::new(entries)
    }

    pub fn load(path: &Path) -> Result<Self, BackendError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| BackendError::Script(format!("reading {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn requests(&self) -> Vec<LlmRequest> {
        self.requests.lock().expect("request log poisoned").clone()
    }
}

impl LlmBackend for MockBackend {
    fn complete(&self, request: &LlmRequest) -> Result<String, BackendError> {
        self.requests.lock().expect("request log poisoned").push(request.clone());
        Ok(self
            .script
            .get(&(request.role, request.step))
            .cloned()
            .unwrap_or_default())
    }
}

/// Chat-completions client (`POST {endpoint}` with `model` and `messages`).
pub struct LiveBackend {
    endpoint: String,
    api_key: Option<String>,
    model: String,
    client: reqwest::blocking::Client,
}

impl LiveBackend {
    pub fn new(endpoint: impl Into<String>, api_key: Option<String>, model: impl Into<String>) -> Result<Self, BackendError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(120))
            .build()
            .map_err(|e| BackendError::Config(e.to_string()))?;
        Ok(LiveBackend {
            endpoint: endpoint.into(),
            api_key,
            model: model.into(),
            client,
        })
    }

    pub fn from_env() -> Result<Self, BackendError> {
        let endpoint =
            std::env::var(LLM_ENDPOINT_ENV).map_err(|_| BackendError::Config(format!("{LLM_ENDPOINT_ENV} is not set")))?;
        let model = std::env::var(LLM_MODEL_ENV).map_err(|_| BackendError::Config(format!("{LLM_MODEL_ENV} is not set")))?;
        Self::new(endpoint, std::env::var(LLM_API_KEY_ENV).ok(), model)
    }
}

impl LlmBackend for LiveBackend {
    fn complete(&self, request: &LlmRequest) -> Result<String, BackendError> {
        let mut messages = vec![json!({"role": "system", "content": request.system_prompt})];
        messages.extend(request.messages.iter().map(|m| json!({"role": m.role, "content": m.content})));
        let mut call = self.client.post(&self.endpoint).json(&json!({
            "model": self.model,
            "temperature": 0,
            "messages": messages,
        }));
        if let Some(key) = &self.api_key {
            call = call.bearer_auth(key);
        }
        let response = call
            .send()
            .and_then(|r| r.error_for_status())
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        let body: Value = response.json().map_err(|e| BackendError::Protocol(e.to_string()))?;
        body.pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| BackendError::Protocol("response has no choices[0].message.content".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn request(role: AgentRole, step: usize) -> LlmRequest {
        LlmRequest {
            role,
            step,
            system_prompt: String::new(),
            messages: vec![],
        }
    }

    #[test]
    fn mock_replays_by_role_and_step() {
        let m = MockBackend::from_json(
            r#"[{"role": "planner", "step": 1, "message": "hello"},
                {"role": "reviewer", "step": 2, "message": "ACCEPT"}]"#,
        )
        .unwrap();
        assert_eq!(m.complete(&request(AgentRole::Planner, 1)).unwrap(), "hello");
        assert_eq!(m.complete(&request(AgentRole::Planner, 2)).unwrap(), "");
        assert_eq!(m.complete(&request(AgentRole::Reviewer, 2)).unwrap(), "ACCEPT");
        assert_eq!(m.requests().len(), 3);
    }

    #[test]
    fn duplicate_script_entries_are_rejected() {
        let e = ScriptEntry {
            role: AgentRole::Coder,
            step: 4,
            message: "x".into(),
        };
        assert!(MockBackend::new(vec![e.clone(), e]).is_err());
    }
}
