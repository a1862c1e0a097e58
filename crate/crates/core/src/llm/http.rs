use std::time::Duration;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{BackendError, ChatBackend, ChatMessage};

pub const DEFAULT_API_KEY_ENV: &str = "OPENAI_API_KEY";

fn default_api_key_env() -> String {
    DEFAULT_API_KEY_ENV.to_string()
}

fn default_attempts() -> u32 {
    3
}

fn default_backoff_ms() -> u64 {
    250
}

fn default_timeout_s() -> u64 {
    120
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HttpConfig {
    /// e.g. `https://api.openai.com/v1`; `/chat/completions` is appended.
    pub base_url: String,
    pub model: String,
    #[serde(default)]
    pub temperature: Option<f64>,
    #[serde(default = "default_api_key_env")]
    pub api_key_env: String,
    #[serde(default = "default_attempts")]
    pub max_attempts: u32,
    #[serde(default = "default_backoff_ms")]
    pub backoff_ms: u64,
    #[serde(default = "default_timeout_s")]
    pub timeout_s: u64,
}

impl HttpConfig {
    pub fn new(base_url: impl Into<String>, model: impl Into<String>) -> Self {
        HttpConfig {
            base_url: base_url.into(),
            model: model.into(),
            temperature: None,
            api_key_env: default_api_key_env(),
            max_attempts: default_attempts(),
            backoff_ms: default_backoff_ms(),
            timeout_s: default_timeout_s(),
        }
    }
}

/// Client for an OpenAI-compatible chat-completions endpoint.
pub struct HttpBackend {
    id: String,
    config: HttpConfig,
    endpoint: String,
    api_key: Option<String>,
    client: reqwest::blocking::Client,
}

/// Builds the JSON body for `POST /chat/completions`.
pub fn request_body(model: &str, temperature: Option<f64>, messages: &[ChatMessage]) -> Value {
    let messages: Vec<Value> = messages
        .iter()
        .map(|m| {
            let content = if m.images.is_empty() {
                Value::String(m.text.clone())
            } else {
                let mut parts = Vec::new();
                if !m.text.is_empty() {
                    parts.push(json!({"type": "text", "text": m.text}));
                }
                for img in &m.images {
                    parts.push(json!({
                        "type": "image_url",
                        "image_url": {"url": format!("data:image/png;base64,{}", STANDARD.encode(img))}
                    }));
                }
                Value::Array(parts)
            };
            json!({"role": m.role.as_str(), "content": content})
        })
        .collect();
    let mut body = json!({"model": model, "messages": messages});
    if let Some(t) = temperature {
        body["temperature"] = json!(t);
    }
    body
}

impl HttpBackend {
    pub fn new(config: HttpConfig) -> Result<Self, BackendError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_s))
            .connect_timeout(Duration::from_secs(10))
            .build()
            .map_err(|e| BackendError::Config(e.to_string()))?;
        let endpoint = format!("{}/chat/completions", config.base_url.trim_end_matches('/'));
        let api_key = std::env::var(&config.api_key_env).ok().filter(|k| !k.is_empty());
        Ok(HttpBackend { id: format!("http:{}", config.model), config, endpoint, api_key, client })
    }

    fn attempt(&self, body: &Value) -> Result<Result<String, BackendError>, String> {
        let mut req = self.client.post(&self.endpoint).json(body);
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        // Outer Err is retryable (transport), inner Err is final.
        let resp = req.send().map_err(|e| e.to_string())?;
        let status = resp.status();
        if status.is_server_error() || status.as_u16() == 429 {
            return Err(format!("HTTP {status}"));
        }
        let text = resp.text().map_err(|e| e.to_string())?;
        if !status.is_success() {
            return Ok(Err(BackendError::BackendUnavailable(format!("HTTP {status}: {text}"))));
        }
        let parsed: Value = match serde_json::from_str(&text) {
            Ok(v) => v,
            Err(e) => return Ok(Err(BackendError::BackendUnavailable(format!("malformed response: {e}")))),
        };
        Ok(parsed["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| BackendError::BackendUnavailable("response has no choices[0].message.content".into())))
    }
}

impl ChatBackend for HttpBackend {
    fn id(&self) -> &str {
        &self.id
    }

    fn complete(&self, messages: &[ChatMessage]) -> Result<String, BackendError> {
        let body = request_body(&self.config.model, self.config.temperature, messages);
        let attempts = self.config.max_attempts.max(1);
        let mut last = String::new();
        for i in 0..attempts {
            match self.attempt(&body) {
                Ok(result) => return result,
                Err(transport) => last = transport,
            }
            if i + 1 < attempts {
                std::thread::sleep(Duration::from_millis(self.config.backoff_ms << i));
            }
        }
        Err(BackendError::BackendUnavailable(format!("{attempts} attempts failed, last: {last}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_only_messages_use_string_content() {
        let body = request_body("m", None, &[ChatMessage::system("s"), ChatMessage::user("u")]);
        assert_eq!(body["messages"][1]["content"], "u");
        assert!(body.get("temperature").is_none());
    }

    #[test]
    fn images_become_data_url_parts() {
        let msg = ChatMessage::user("what is this?").with_image(vec![0x89, b'P']);
        let body = request_body("m", Some(0.2), &[ChatMessage::system("s"), msg]);
        let parts = body["messages"][1]["content"].as_array().unwrap();
        assert_eq!(parts[0]["type"], "text");
        assert_eq!(parts[1]["type"], "image_url");
        assert_eq!(parts[1]["image_url"]["url"], "data:image/png;base64,iVA=");
        assert_eq!(body["temperature"], 0.2);
    }
}
