//! Chat-completion transport and the strict-JSON retry loop shared by the
//! planner and sub-goal language-model backends.

use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

pub const DEFAULT_RETRIES: usize = 3;
pub const DEFAULT_API_KEY_ENV: &str = "SCULPT_LLM_API_KEY";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LlmConfig {
    pub endpoint: String,
    pub model: String,
    /// Name of the environment variable holding the bearer token.
    pub api_key_env: String,
    pub temperature: f64,
    pub retries: usize,
    pub timeout_s: u64,
}

impl Default for LlmConfig {
    fn default() -> Self {
        LlmConfig {
            endpoint: "http://localhost:8080/v1/chat/completions".into(),
            model: "default".into(),
            api_key_env: DEFAULT_API_KEY_ENV.into(),
            temperature: 0.0,
            retries: DEFAULT_RETRIES,
            timeout_s: 60,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        ChatMessage { role: "system".into(), content: content.into() }
    }

    pub fn user(content: impl Into<String>) -> Self {
        ChatMessage { role: "user".into(), content: content.into() }
    }
}

/// Sends one conversation and returns the assistant's text.
pub trait ChatTransport: Send + Sync {
    fn complete(&self, messages: &[ChatMessage]) -> Result<String>;
}

/// OpenAI-compatible `/chat/completions` over HTTP.
pub struct HttpTransport {
    config: LlmConfig,
    api_key: Option<String>,
    agent: ureq::Agent,
}

impl HttpTransport {
    pub fn new(config: LlmConfig) -> Self {
        let api_key = std::env::var(&config.api_key_env).ok();
        let agent =
            ureq::Agent::config_builder().timeout_global(Some(Duration::from_secs(config.timeout_s))).build().into();
        HttpTransport { config, api_key, agent }
    }
}

impl ChatTransport for HttpTransport {
    fn complete(&self, messages: &[ChatMessage]) -> Result<String> {
        let body = serde_json::json!({
            "model": self.config.model,
            "temperature": self.config.temperature,
            "messages": messages,
        });
        let mut req = self.agent.post(&self.config.endpoint);
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let endpoint = &self.config.endpoint;
        let mut resp = req.send_json(&body).map_err(|e| Error::Transport(format!("POST {endpoint}: {e}")))?;
        let v: Value =
            resp.body_mut().read_json().map_err(|e| Error::Transport(format!("reading reply from {endpoint}: {e}")))?;
        v.pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .map(str::to_owned)
            .ok_or_else(|| Error::Transport(format!("{endpoint}: reply has no message content")))
    }
}

/// Replays canned replies in order; used for tests and offline runs.
#[derive(Debug, Default)]
pub struct ScriptedTransport {
    replies: Mutex<std::collections::VecDeque<Result<String, String>>>,
    calls: Mutex<Vec<Vec<ChatMessage>>>,
}

impl ScriptedTransport {
    /// `Ok` entries are returned as replies, `Err` entries as transport failures.
    pub fn new(replies: impl IntoIterator<Item = Result<String, String>>) -> Self {
        ScriptedTransport { replies: Mutex::new(replies.into_iter().collect()), calls: Mutex::new(Vec::new()) }
    }

    pub fn ok(replies: impl IntoIterator<Item = impl Into<String>>) -> Self {
        Self::new(replies.into_iter().map(|r| Ok(r.into())))
    }

    pub fn call_count(&self) -> usize {
        self.calls.lock().expect("poisoned").len()
    }

    pub fn calls(&self) -> Vec<Vec<ChatMessage>> {
        self.calls.lock().expect("poisoned").clone()
    }
}

impl ChatTransport for ScriptedTransport {
    fn complete(&self, messages: &[ChatMessage]) -> Result<String> {
        self.calls.lock().expect("poisoned").push(messages.to_vec());
        match self.replies.lock().expect("poisoned").pop_front() {
            Some(Ok(r)) => Ok(r),
            Some(Err(e)) => Err(Error::Transport(e)),
            None => Err(Error::Transport("scripted transport has no replies left".into())),
        }
    }
}

/// One exchange inside [`ask_json`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Attempt {
    pub reply: String,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct JsonOutcome<T> {
    /// `None` once every attempt failed to parse.
    pub value: Option<T>,
    pub attempts: Vec<Attempt>,
}

impl<T> JsonOutcome<T> {
    pub fn retries_used(&self) -> usize {
        self.attempts.len().saturating_sub(1)
    }
}

/// Asks once plus up to `retries` more times until `parse` accepts the reply.
/// Each failed reply and its error are fed back before the next attempt.
/// Transport errors abort immediately.
pub fn ask_json<T>(
    transport: &dyn ChatTransport,
    mut messages: Vec<ChatMessage>,
    retries: usize,
    mut parse: impl FnMut(&Value) -> std::result::Result<T, String>,
) -> Result<JsonOutcome<T>> {
    let mut attempts = Vec::new();
    for attempt in 0..=retries {
        let reply = transport.complete(&messages)?;
        let parsed =
            extract_json(&reply).ok_or_else(|| "reply is not a JSON object".to_string()).and_then(|v| parse(&v));
        match parsed {
            Ok(value) => {
                attempts.push(Attempt { reply, error: None });
                return Ok(JsonOutcome { value: Some(value), attempts });
            }
            Err(err) => {
                log::warn!("model reply rejected (attempt {}): {err}", attempt + 1);
                messages.push(ChatMessage { role: "assistant".into(), content: reply.clone() });
                messages.push(ChatMessage::user(format!(
                    "That reply was rejected: {err}. Answer again with only the JSON object."
                )));
                attempts.push(Attempt { reply, error: Some(err) });
            }
        }
    }
    Ok(JsonOutcome { value: None, attempts })
}

/// The reply parsed as JSON, tolerating a fenced code block around it.
fn extract_json(reply: &str) -> Option<Value> {
    let t = reply.trim();
    let t = t
        .strip_prefix("```json")
        .or_else(|| t.strip_prefix("```"))
        .and_then(|s| s.strip_suffix("```"))
        .unwrap_or(t)
        .trim();
    serde_json::from_str::<Value>(t).ok().filter(Value::is_object)
}
