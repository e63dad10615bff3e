//! Chat-completion client contract and the HTTP implementation.
//!
//! The wire protocol is a POST of `{model, messages, temperature}` to a
//! configurable endpoint, bearer token from `CATCH_LLM_TOKEN`, with
//! exponential-backoff retries.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::prompts;
use crate::error::{Error, Result};

pub const TOKEN_ENV_VAR: &str = "CATCH_LLM_TOKEN";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PromptKind {
    Label,
    VoteCore,
    IsRelevant,
    Conclude,
}

/// A chat-completion backend. Implementations must be shareable across
/// concurrent callers.
pub trait PromptClient: Send + Sync {
    /// One generation call; the payload is the kind-specific input block.
    fn generate(&self, kind: PromptKind, payload: &str) -> Result<String>;

    /// Upper bound on concurrent calls the client tolerates.
    fn parallelism(&self) -> usize {
        1
    }

    /// Attempts per call for retryable failures, including non-parseable
    /// responses to structured prompts.
    fn max_retries(&self) -> usize {
        3
    }
}

/// Parse a yes/no style answer; None when the response fits neither.
pub fn parse_bool_response(text: &str) -> Option<bool> {
    let t = text.trim().to_lowercase();
    let t = t.trim_matches(|c: char| !c.is_alphanumeric());
    match t {
        "yes" | "true" | "y" => Some(true),
        "no" | "false" | "n" => Some(false),
        _ => {
            if t.starts_with("yes") {
                Some(true)
            } else if t.starts_with("no") {
                Some(false)
            } else {
                None
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClientConfig {
    pub endpoint: String,
    pub model: String,
    pub temperature: f64,
    pub max_retries: usize,
    pub parallelism: usize,
    pub backoff_base_ms: u64,
    pub timeout_ms: u64,
}

impl Default for ClientConfig {
    fn default() -> Self {
        ClientConfig {
            endpoint: String::new(),
            model: String::new(),
            temperature: 0.0,
            max_retries: 3,
            parallelism: 4,
            backoff_base_ms: 500,
            timeout_ms: 60_000,
        }
    }
}

#[derive(Serialize)]
struct ChatMessage<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: Vec<ChatMessage<'a>>,
    temperature: f64,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatResponseMessage,
}

#[derive(Deserialize)]
struct ChatResponseMessage {
    content: String,
}

/// Extract the first choice's message content from a raw response body.
pub fn parse_chat_response(body: &str) -> Result<String> {
    let parsed: ChatResponse = serde_json::from_str(body)
        .map_err(|e| Error::Client(format!("malformed chat response: {e}")))?;
    parsed
        .choices
        .into_iter()
        .next()
        .map(|c| c.message.content)
        .ok_or_else(|| Error::Client("chat response carries no choices".into()))
}

/// Blocking HTTP chat-completion client.
pub struct HttpClient {
    cfg: ClientConfig,
    token: Option<String>,
    http: reqwest::blocking::Client,
}

impl HttpClient {
    pub fn new(cfg: ClientConfig) -> Result<Self> {
        if cfg.endpoint.is_empty() {
            return Err(Error::Config("http client requires an endpoint".into()));
        }
        let http = reqwest::blocking::Client::builder()
            .timeout(Duration::from_millis(cfg.timeout_ms))
            .build()
            .map_err(|e| Error::Client(format!("failed to build http client: {e}")))?;
        Ok(HttpClient {
            token: std::env::var(TOKEN_ENV_VAR).ok(),
            cfg,
            http,
        })
    }

    fn attempt(&self, system: &str, payload: &str) -> Result<String> {
        let request = ChatRequest {
            model: &self.cfg.model,
            messages: vec![
                ChatMessage {
                    role: "system",
                    content: system,
                },
                ChatMessage {
                    role: "user",
                    content: payload,
                },
            ],
            temperature: self.cfg.temperature,
        };
        let mut builder = self.http.post(&self.cfg.endpoint).json(&request);
        if let Some(token) = &self.token {
            builder = builder.bearer_auth(token);
        }
        let response = builder
            .send()
            .map_err(|e| Error::Client(format!("request to {} failed: {e}", self.cfg.endpoint)))?;
        let status = response.status();
        let body = response
            .text()
            .map_err(|e| Error::Client(format!("failed reading response body: {e}")))?;
        if !status.is_success() {
            return Err(Error::Client(format!(
                "endpoint returned {status}: {}",
                body.chars().take(200).collect::<String>()
            )));
        }
        parse_chat_response(&body)
    }
}

impl PromptClient for HttpClient {
    fn generate(&self, kind: PromptKind, payload: &str) -> Result<String> {
        let system = prompts::system_prompt(kind);
        let attempts = self.cfg.max_retries.max(1);
        let mut last_err = None;
        for attempt in 0..attempts {
            if attempt > 0 {
                let delay = self.cfg.backoff_base_ms.saturating_mul(1 << (attempt - 1));
                std::thread::sleep(Duration::from_millis(delay));
            }
            match self.attempt(system, payload) {
                Ok(text) => {
                    let trimmed = text.trim().to_string();
                    if trimmed.is_empty() {
                        last_err = Some(Error::Client("empty completion".into()));
                        continue;
                    }
                    return Ok(trimmed);
                }
                Err(e) => last_err = Some(e),
            }
        }
        Err(last_err.unwrap_or_else(|| Error::Client("no attempts made".into())))
    }

    fn parallelism(&self) -> usize {
        self.cfg.parallelism.max(1)
    }

    fn max_retries(&self) -> usize {
        self.cfg.max_retries.max(1)
    }
}
