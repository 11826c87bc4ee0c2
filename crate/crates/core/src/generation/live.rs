//! HTTP provider for OpenAI-compatible image-generation endpoints.

use std::sync::Mutex;
use std::time::{Duration, Instant};

use base64::Engine;
use serde::Deserialize;
use serde_json::json;

use super::provider::{check_request, ImageProvider, ProviderError};
use super::GenerationError;

pub const DEFAULT_API_KEY_ENV: &str = "T2I_API_KEY";

#[derive(Debug, Clone)]
pub struct LiveProviderConfig {
    pub endpoint: String,
    pub model: String,
    /// Environment variable holding the bearer token.
    pub api_key_env: String,
    /// Minimum spacing between the starts of consecutive requests.
    pub min_interval: Duration,
    pub timeout: Duration,
}

impl Default for LiveProviderConfig {
    fn default() -> Self {
        Self {
            endpoint: "https://api.openai.com/v1/images/generations".to_owned(),
            model: "dall-e-2".to_owned(),
            api_key_env: DEFAULT_API_KEY_ENV.to_owned(),
            min_interval: Duration::from_secs(1),
            timeout: Duration::from_secs(120),
        }
    }
}

pub struct LiveProvider {
    config: LiveProviderConfig,
    api_key: String,
    client: reqwest::blocking::Client,
    last_request: Mutex<Option<Instant>>,
}

impl std::fmt::Debug for LiveProvider {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LiveProvider")
            .field("config", &self.config)
            .finish_non_exhaustive()
    }
}

impl LiveProvider {
    /// Reads the API key from the configured environment variable. Fails
    /// before any network activity when it is unset or empty.
    pub fn from_env(config: LiveProviderConfig) -> Result<Self, GenerationError> {
        let api_key = std::env::var(&config.api_key_env)
            .ok()
            .filter(|k| !k.trim().is_empty())
            .ok_or_else(|| GenerationError::MissingCredential(config.api_key_env.clone()))?;
        Self::with_key(config, api_key)
    }

    pub fn with_key(config: LiveProviderConfig, api_key: String) -> Result<Self, GenerationError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(config.timeout)
            // no connection reuse: every prompt is its own session
            .pool_max_idle_per_host(0)
            .build()
            .map_err(|e| GenerationError::Config(format!("HTTP client: {e}")))?;
        Ok(Self {
            config,
            api_key,
            client,
            last_request: Mutex::new(None),
        })
    }

    fn pace(&self) {
        let mut last = self.last_request.lock().unwrap_or_else(|e| e.into_inner());
        if let Some(prev) = *last {
            let elapsed = prev.elapsed();
            if elapsed < self.config.min_interval {
                std::thread::sleep(self.config.min_interval - elapsed);
            }
        }
        *last = Some(Instant::now());
    }
}

impl ImageProvider for LiveProvider {
    fn id(&self) -> String {
        format!("live:{}", self.config.model)
    }

    fn generate(&self, prompt: &str, size: u32) -> Result<Vec<u8>, ProviderError> {
        check_request(prompt, size)?;
        self.pace();
        let body = json!({
            "model": self.config.model,
            "prompt": prompt,
            "n": 1,
            "size": format!("{size}x{size}"),
            "response_format": "b64_json",
        });
        let resp = self
            .client
            .post(&self.config.endpoint)
            .bearer_auth(&self.api_key)
            .json(&body)
            .send()
            .map_err(|e| ProviderError::Transient(e.to_string()))?;
        let status = resp.status().as_u16();
        let text = resp
            .text()
            .map_err(|e| ProviderError::Transient(e.to_string()))?;
        classify_response(status, &text)
    }
}

#[derive(Deserialize)]
struct ImagesResponse {
    data: Vec<ImageDatum>,
}

#[derive(Deserialize)]
struct ImageDatum {
    b64_json: Option<String>,
}

#[derive(Deserialize)]
struct ErrorEnvelope {
    error: ErrorBody,
}

#[derive(Deserialize)]
struct ErrorBody {
    #[serde(default)]
    message: String,
    #[serde(default)]
    code: Option<String>,
    #[serde(default, rename = "type")]
    kind: Option<String>,
}

const POLICY_CODES: [&str; 3] = [
    "content_policy_violation",
    "image_generation_user_error",
    "moderation_blocked",
];

/// Maps an HTTP status and body to image bytes or a provider outcome.
pub fn classify_response(status: u16, body: &str) -> Result<Vec<u8>, ProviderError> {
    if (200..300).contains(&status) {
        let parsed: ImagesResponse = serde_json::from_str(body)
            .map_err(|e| ProviderError::Fatal(format!("unparseable response: {e}")))?;
        let b64 = parsed
            .data
            .into_iter()
            .next()
            .and_then(|d| d.b64_json)
            .ok_or_else(|| ProviderError::Fatal("response carries no image".into()))?;
        return base64::engine::general_purpose::STANDARD
            .decode(b64.trim())
            .map_err(|e| ProviderError::Fatal(format!("bad base64 payload: {e}")));
    }

    let err = serde_json::from_str::<ErrorEnvelope>(body).ok().map(|e| e.error);
    let detail = match &err {
        Some(e) => format!("HTTP {status}: {}", e.message),
        None => format!("HTTP {status}"),
    };
    let policy = err.as_ref().is_some_and(|e| {
        [e.code.as_deref(), e.kind.as_deref()]
            .into_iter()
            .flatten()
            .any(|c| POLICY_CODES.contains(&c))
    });
    match status {
        400 if policy => Err(ProviderError::Rejected(detail)),
        408 | 409 | 429 | 500..=599 => Err(ProviderError::Transient(detail)),
        _ => Err(ProviderError::Fatal(detail)),
    }
}
