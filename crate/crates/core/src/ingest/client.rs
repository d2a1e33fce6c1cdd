use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use super::EndpointConfig;

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

/// A failed exchange with the endpoint. All variants are retried.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ServiceError {
    #[error("HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("transport error: {0}")]
    Transport(String),
    #[error("unexpected response shape: {0}")]
    Protocol(String),
}

/// One chat completion: messages in, assistant text out.
pub trait ChatClient: Sync {
    fn complete(&self, messages: &[ChatMessage]) -> Result<String, ServiceError>;
}

/// Blocking client for `POST {base_url}/chat/completions`.
pub struct HttpChatClient {
    http: reqwest::blocking::Client,
    url: String,
    config: EndpointConfig,
}

impl HttpChatClient {
    pub fn new(config: &EndpointConfig) -> Result<Self, ServiceError> {
        let http = reqwest::blocking::Client::builder()
            .timeout(config.request_timeout)
            .build()
            .map_err(|e| ServiceError::Transport(e.to_string()))?;
        Ok(HttpChatClient {
            http,
            url: format!("{}/chat/completions", config.base_url.trim_end_matches('/')),
            config: config.clone(),
        })
    }
}

fn snippet(body: &str) -> String {
    const MAX: usize = 300;
    match body.char_indices().nth(MAX) {
        Some((i, _)) => format!("{}…", &body[..i]),
        None => body.to_string(),
    }
}

impl ChatClient for HttpChatClient {
    fn complete(&self, messages: &[ChatMessage]) -> Result<String, ServiceError> {
        let mut body = json!({ "model": self.config.model_name, "messages": messages });
        if let Some(t) = self.config.temperature {
            body["temperature"] = json!(t);
        }
        let mut req = self.http.post(&self.url).json(&body);
        if !self.config.api_key.is_empty() {
            req = req.bearer_auth(self.config.api_key.expose());
        }
        // reqwest errors carry the URL only, never headers.
        let resp = req.send().map_err(|e| ServiceError::Transport(e.without_url().to_string()))?;
        let status = resp.status();
        let text = resp.text().map_err(|e| ServiceError::Transport(e.without_url().to_string()))?;
        if !status.is_success() {
            return Err(ServiceError::Http { status: status.as_u16(), body: snippet(&text) });
        }
        let v: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| ServiceError::Protocol(e.to_string()))?;
        v.pointer("/choices/0/message/content")
            .and_then(|c| c.as_str())
            .map(str::to_string)
            .ok_or_else(|| ServiceError::Protocol(format!("no choices[0].message.content in {}", snippet(&text))))
    }
}
