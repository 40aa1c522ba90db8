//! OpenAI-compatible chat-completion backend.

use std::sync::Arc;
use std::time::Duration;

use bd_core::rag::{BackendError, LlmBackend, StubBackend};
use reqwest::blocking::Client;
use reqwest::StatusCode;
use serde::{Deserialize, Serialize};

pub const ENDPOINT_VAR: &str = "BD_LLM_ENDPOINT";
pub const API_KEY_VAR: &str = "BD_LLM_API_KEY";
pub const DEFAULT_ENDPOINT: &str = "https://api.openai.com/v1";

pub struct HttpBackend {
    client: Client,
    url: String,
    api_key: Option<String>,
    id: String,
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: [Message<'a>; 1],
    temperature: f32,
    seed: u64,
}

#[derive(Serialize)]
struct Message<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: ChoiceMessage,
}

#[derive(Deserialize)]
struct ChoiceMessage {
    #[serde(default)]
    content: Option<String>,
}

impl HttpBackend {
    /// `endpoint` is a base URL (`.../v1`) or a full `.../chat/completions` URL.
    pub fn new(endpoint: &str, api_key: Option<String>, timeout: Duration) -> Result<HttpBackend, BackendError> {
        let base = endpoint.trim_end_matches('/');
        let url =
            if base.ends_with("/chat/completions") { base.to_string() } else { format!("{base}/chat/completions") };
        let client =
            Client::builder().timeout(timeout).build().map_err(|e| BackendError::Fatal(format!("http client: {e}")))?;
        Ok(HttpBackend { client, id: format!("http:{url}"), url, api_key })
    }

    /// Live backend when either environment variable is set, stub otherwise.
    pub fn from_env(timeout: Duration) -> Result<Arc<dyn LlmBackend>, BackendError> {
        let endpoint = std::env::var(ENDPOINT_VAR).ok().filter(|v| !v.trim().is_empty());
        let key = std::env::var(API_KEY_VAR).ok().filter(|v| !v.trim().is_empty());
        if endpoint.is_none() && key.is_none() {
            return Ok(Arc::new(StubBackend));
        }
        let endpoint = endpoint.as_deref().unwrap_or(DEFAULT_ENDPOINT);
        Ok(Arc::new(HttpBackend::new(endpoint, key, timeout)?))
    }
}

fn classify(status: StatusCode, body: &str) -> BackendError {
    let snippet: String = body.chars().take(200).collect();
    let message = format!("HTTP {status}: {snippet}");
    if status == StatusCode::TOO_MANY_REQUESTS || status.is_server_error() {
        BackendError::Transient(message)
    } else {
        BackendError::Fatal(message)
    }
}

impl LlmBackend for HttpBackend {
    fn backend_id(&self) -> &str {
        &self.id
    }

    fn complete(&self, prompt: &str, model_id: &str, seed: u64) -> Result<String, BackendError> {
        let body = ChatRequest {
            model: model_id,
            messages: [Message { role: "user", content: prompt }],
            temperature: 0.0,
            seed,
        };
        let mut request = self.client.post(&self.url).json(&body);
        if let Some(key) = &self.api_key {
            request = request.bearer_auth(key);
        }
        // Connection failures and timeouts are worth another attempt.
        let response = request.send().map_err(|e| BackendError::Transient(e.to_string()))?;
        let status = response.status();
        let text = response.text().map_err(|e| BackendError::Transient(e.to_string()))?;
        if !status.is_success() {
            return Err(classify(status, &text));
        }
        let parsed: ChatResponse =
            serde_json::from_str(&text).map_err(|e| BackendError::Fatal(format!("unexpected response body: {e}")))?;
        let choice = parsed.choices.into_iter().next().ok_or_else(|| BackendError::Fatal("no choices".into()))?;
        Ok(choice.message.content.unwrap_or_default())
    }
}
