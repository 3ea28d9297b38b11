//! Chat-completion providers.

use std::collections::VecDeque;
use std::io::ErrorKind;
use std::path::Path;
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Prefix of an endpoint that names a mock transcript file instead of a URL.
pub const MOCK_SCHEME: &str = "mock:";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        Self::new(Role::System, content)
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self::new(Role::User, content)
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self::new(Role::Assistant, content)
    }

    fn new(role: Role, content: impl Into<String>) -> Self {
        let mut content = content.into();
        if content.is_empty() {
            // the wire format rejects empty content
            content.push(' ');
        }
        ChatMessage { role, content }
    }
}

fn default_timeout() -> u64 {
    60
}

fn default_max_tokens() -> u32 {
    4096
}

/// Where and how to reach a model. The credential is the *name* of an
/// environment variable, read at request time.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProviderConfig {
    pub endpoint: String,
    pub model: String,
    #[serde(default)]
    pub credential_env: Option<String>,
    #[serde(default = "default_timeout", alias = "timeout_s")]
    pub timeout_secs: u64,
    #[serde(default = "default_max_tokens")]
    pub max_tokens: u32,
}

impl ProviderConfig {
    pub fn new(endpoint: impl Into<String>, model: impl Into<String>) -> Self {
        ProviderConfig {
            endpoint: endpoint.into(),
            model: model.into(),
            credential_env: None,
            timeout_secs: default_timeout(),
            max_tokens: default_max_tokens(),
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.model.trim().is_empty() {
            return Err("model: must not be empty".into());
        }
        if self.endpoint.trim().is_empty() {
            return Err("endpoint: must not be empty".into());
        }
        if self.timeout_secs == 0 {
            return Err("timeout_secs: must be at least 1".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProviderError {
    #[error("provider timed out after {seconds}s")]
    Timeout { seconds: u64 },
    #[error("provider returned HTTP {code}: {body}")]
    HttpStatus {
        code: u16,
        body: String,
        /// Seconds from a `Retry-After` header.
        retry_after: Option<u64>,
    },
    #[error("malformed provider response: {0}")]
    MalformedResponse(String),
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("mock transcript exhausted")]
    TranscriptExhausted,
    #[error("credential variable {0} is not set")]
    MissingCredential(String),
    #[error("invalid provider configuration: {0}")]
    InvalidConfig(String),
}

pub trait Provider: Send + Sync {
    fn complete(&self, messages: &[ChatMessage]) -> Result<String, ProviderError>;
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: &'a [ChatMessage],
    max_tokens: u32,
}

/// Exact JSON body sent for a completion request.
pub fn request_body(model: &str, max_tokens: u32, messages: &[ChatMessage]) -> String {
    serde_json::to_string(&ChatRequest {
        model,
        messages,
        max_tokens,
    })
    .expect("request serializes")
}

/// Plays a fixed list of responses and records every request body.
#[derive(Debug)]
pub struct MockProvider {
    model: String,
    max_tokens: u32,
    responses: Mutex<VecDeque<String>>,
    requests: Mutex<Vec<String>>,
}

impl MockProvider {
    pub fn new<S: Into<String>>(responses: impl IntoIterator<Item = S>) -> Self {
        MockProvider {
            model: "mock".into(),
            max_tokens: default_max_tokens(),
            responses: Mutex::new(responses.into_iter().map(Into::into).collect()),
            requests: Mutex::new(Vec::new()),
        }
    }

    /// Transcript as a JSON array of strings.
    pub fn from_json(text: &str) -> Result<Self, ProviderError> {
        let responses: Vec<String> = serde_json::from_str(text)
            .map_err(|e| ProviderError::InvalidConfig(format!("mock transcript: {e}")))?;
        Ok(Self::new(responses))
    }

    pub fn from_file(path: &Path) -> Result<Self, ProviderError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ProviderError::InvalidConfig(format!("mock transcript {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn with_model(mut self, model: &str, max_tokens: u32) -> Self {
        self.model = model.to_string();
        self.max_tokens = max_tokens;
        self
    }

    /// Request bodies in call order.
    pub fn requests(&self) -> Vec<String> {
        self.requests.lock().expect("mock lock").clone()
    }

    pub fn remaining(&self) -> usize {
        self.responses.lock().expect("mock lock").len()
    }
}

impl Provider for MockProvider {
    fn complete(&self, messages: &[ChatMessage]) -> Result<String, ProviderError> {
        self.requests
            .lock()
            .expect("mock lock")
            .push(request_body(&self.model, self.max_tokens, messages));
        self.responses
            .lock()
            .expect("mock lock")
            .pop_front()
            .ok_or(ProviderError::TranscriptExhausted)
    }
}

/// HTTP client for an OpenAI-style chat-completions endpoint.
pub struct RemoteProvider {
    config: ProviderConfig,
    agent: ureq::Agent,
}

impl std::fmt::Debug for RemoteProvider {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RemoteProvider").field("config", &self.config).finish()
    }
}

const BODY_EXCERPT: usize = 512;

impl RemoteProvider {
    pub fn new(config: ProviderConfig) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(config.timeout_secs)))
            .http_status_as_error(false)
            .build()
            .into();
        RemoteProvider { config, agent }
    }

    fn map_err(&self, e: ureq::Error) -> ProviderError {
        match e {
            ureq::Error::Timeout(_) => ProviderError::Timeout {
                seconds: self.config.timeout_secs,
            },
            ureq::Error::Io(io) if matches!(io.kind(), ErrorKind::TimedOut | ErrorKind::WouldBlock) => {
                ProviderError::Timeout {
                    seconds: self.config.timeout_secs,
                }
            }
            other => ProviderError::Transport(other.to_string()),
        }
    }
}

impl Provider for RemoteProvider {
    fn complete(&self, messages: &[ChatMessage]) -> Result<String, ProviderError> {
        let body = request_body(&self.config.model, self.config.max_tokens, messages);
        let mut req = self
            .agent
            .post(&self.config.endpoint)
            .header("Content-Type", "application/json");
        if let Some(var) = &self.config.credential_env {
            let key = std::env::var(var).map_err(|_| ProviderError::MissingCredential(var.clone()))?;
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = req.send(body.as_str()).map_err(|e| self.map_err(e))?;
        let code = resp.status().as_u16();
        let retry_after = resp
            .headers()
            .get("retry-after")
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.trim().parse().ok());
        let text = resp.body_mut().read_to_string().map_err(|e| self.map_err(e))?;
        if !(200..300).contains(&code) {
            return Err(ProviderError::HttpStatus {
                code,
                body: text.chars().take(BODY_EXCERPT).collect(),
                retry_after,
            });
        }
        parse_completion(&text)
    }
}

/// Assistant text from a chat-completions response body.
pub fn parse_completion(body: &str) -> Result<String, ProviderError> {
    let v: serde_json::Value =
        serde_json::from_str(body).map_err(|e| ProviderError::MalformedResponse(e.to_string()))?;
    v.pointer("/choices/0/message/content")
        .and_then(|c| c.as_str())
        .map(str::to_string)
        .ok_or_else(|| ProviderError::MalformedResponse("missing choices[0].message.content".into()))
}

/// Provider for a configuration: `mock:<path>` plays a transcript file,
/// anything else is treated as an HTTP endpoint.
pub fn provider_from_config(config: &ProviderConfig) -> Result<Box<dyn Provider>, ProviderError> {
    config.validate().map_err(ProviderError::InvalidConfig)?;
    match config.endpoint.strip_prefix(MOCK_SCHEME) {
        Some(path) => Ok(Box::new(
            MockProvider::from_file(Path::new(path))?.with_model(&config.model, config.max_tokens),
        )),
        None => Ok(Box::new(RemoteProvider::new(config.clone()))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mock_plays_transcript_and_records() {
        let m = MockProvider::new(["r1"]);
        assert_eq!(m.complete(&[ChatMessage::user("hi")]).unwrap(), "r1");
        assert_eq!(m.requests().len(), 1);
        assert!(m.requests()[0].contains("\"content\":\"hi\""));
        assert_eq!(m.complete(&[ChatMessage::user("again")]), Err(ProviderError::TranscriptExhausted));
        assert_eq!(m.requests().len(), 2);
    }

    #[test]
    fn request_body_matches_golden() {
        let body = request_body(
            "gpt-test",
            256,
            &[ChatMessage::system("be brief"), ChatMessage::user("what is \"x\"?")],
        );
        assert_eq!(
            body,
            r#"{"model":"gpt-test","messages":[{"role":"system","content":"be brief"},{"role":"user","content":"what is \"x\"?"}],"max_tokens":256}"#
        );
    }

    #[test]
    fn completion_parsing() {
        let ok = r#"{"choices":[{"message":{"role":"assistant","content":"hello"}}]}"#;
        assert_eq!(parse_completion(ok).unwrap(), "hello");
        assert!(matches!(parse_completion("{}"), Err(ProviderError::MalformedResponse(_))));
        assert!(matches!(parse_completion("nope"), Err(ProviderError::MalformedResponse(_))));
    }

    #[test]
    fn config_parsing_and_validation() {
        let c: ProviderConfig =
            serde_json::from_str(r#"{"endpoint":"http://x","model":"m","credential_env":"KEY","timeout_s":5}"#).unwrap();
        assert_eq!(c.timeout_secs, 5);
        assert_eq!(c.credential_env.as_deref(), Some("KEY"));
        assert!(c.validate().is_ok());
        assert!(ProviderConfig::new("http://x", " ").validate().unwrap_err().starts_with("model"));
        assert!(serde_json::from_str::<ProviderConfig>(r#"{"endpoint":"x","model":"m","api_key":"k"}"#).is_err());
    }

    #[test]
    fn empty_content_is_padded() {
        assert!(!ChatMessage::user("").content.is_empty());
    }
}
