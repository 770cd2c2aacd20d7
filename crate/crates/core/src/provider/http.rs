use std::path::Path;
use std::thread;
use std::time::{Duration, Instant};

use reqwest::blocking::Client;
use reqwest::StatusCode;
use serde::{Deserialize, Serialize};

use super::{CompletionResult, ModelConfig, Provider, ProviderError};
use crate::prompt::PromptSpec;

/// Environment variable holding the bearer token.
pub const API_KEY_ENV: &str = "ANNOT_API_KEY";

/// Retry schedule for transient failures (HTTP 429, 5xx, timeouts and
/// connection errors). The delay before retry `i` (0-based) is
/// `min(max_delay, base_delay * factor^i)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    #[serde(with = "millis")]
    pub base_delay: Duration,
    pub factor: f64,
    #[serde(with = "millis")]
    pub max_delay: Duration,
    #[serde(with = "millis")]
    pub timeout: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_attempts: 5,
            base_delay: Duration::from_secs(1),
            factor: 2.0,
            max_delay: Duration::from_secs(30),
            timeout: Duration::from_secs(60),
        }
    }
}

impl RetryPolicy {
    pub fn delay(&self, retry: u32) -> Duration {
        let scaled = self.base_delay.as_secs_f64() * self.factor.powi(retry as i32);
        Duration::from_secs_f64(scaled.min(self.max_delay.as_secs_f64()))
    }
}

mod millis {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(d.as_millis() as u64)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        u64::deserialize(d).map(Duration::from_millis)
    }
}

/// Where the API key comes from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Credential {
    Env(String),
    File(std::path::PathBuf),
}

impl Credential {
    pub fn resolve(&self) -> Result<String, ProviderError> {
        let key = match self {
            Credential::Env(var) => std::env::var(var)
                .map_err(|_| ProviderError::AuthError(format!("environment variable {var} is not set")))?,
            Credential::File(path) => read_key_file(path)?,
        };
        let key = key.trim().to_string();
        if key.is_empty() {
            return Err(ProviderError::AuthError("API key is empty".into()));
        }
        Ok(key)
    }
}

fn read_key_file(path: &Path) -> Result<String, ProviderError> {
    std::fs::read_to_string(path)
        .map_err(|e| ProviderError::AuthError(format!("cannot read key file {}: {e}", path.display())))
}

#[derive(Serialize)]
struct WireMessage<'a> {
    role: &'static str,
    content: &'a str,
}

#[derive(Serialize)]
struct WireRequest<'a> {
    model: &'a str,
    messages: [WireMessage<'a>; 2],
    temperature: f64,
    top_p: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    max_tokens: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    stop: Option<&'a [String]>,
}

#[derive(Deserialize)]
struct WireResponse {
    choices: Vec<WireChoice>,
}

#[derive(Deserialize)]
struct WireChoice {
    message: WireReply,
}

#[derive(Deserialize)]
struct WireReply {
    content: Option<String>,
}

/// The JSON body sent for one prompt.
pub fn request_body(prompt: &PromptSpec, config: &ModelConfig) -> serde_json::Value {
    serde_json::to_value(wire_request(prompt, config)).expect("request serializes")
}

fn wire_request<'a>(prompt: &'a PromptSpec, config: &'a ModelConfig) -> WireRequest<'a> {
    WireRequest {
        model: &config.model_name,
        messages: [
            WireMessage { role: "system", content: &prompt.system_message },
            WireMessage { role: "user", content: &prompt.user_message },
        ],
        temperature: config.temperature,
        top_p: config.top_p,
        max_tokens: config.max_tokens,
        stop: config.stop.as_deref(),
    }
}

pub struct HttpChatProvider {
    client: Client,
    url: String,
    api_key: String,
    retry: RetryPolicy,
}

impl std::fmt::Debug for HttpChatProvider {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HttpChatProvider").field("url", &self.url).field("retry", &self.retry).finish()
    }
}

enum Attempt {
    Done(String),
    Retry { error: ProviderError, after: Option<Duration> },
    Fail(ProviderError),
}

impl HttpChatProvider {
    /// `endpoint` is the API base, e.g. `https://api.openai.com/v1`.
    pub fn new(endpoint: &str, credential: &Credential, retry: RetryPolicy) -> Result<Self, ProviderError> {
        let api_key = credential.resolve()?;
        if retry.max_attempts == 0 {
            return Err(ProviderError::InvalidConfig("max_attempts must be at least 1".into()));
        }
        let client = Client::builder()
            .timeout(retry.timeout)
            .build()
            .map_err(|e| ProviderError::Transport { attempts: 0, message: e.to_string() })?;
        Ok(HttpChatProvider {
            client,
            url: format!("{}/chat/completions", endpoint.trim_end_matches('/')),
            api_key,
            retry,
        })
    }

    fn attempt(&self, body: &WireRequest<'_>) -> Attempt {
        let response = match self.client.post(&self.url).bearer_auth(&self.api_key).json(body).send() {
            Ok(r) => r,
            Err(e) if e.is_timeout() || e.is_connect() || e.is_request() => {
                return Attempt::Retry {
                    error: ProviderError::Transport { attempts: 0, message: e.to_string() },
                    after: None,
                }
            }
            Err(e) => return Attempt::Fail(ProviderError::Transport { attempts: 1, message: e.to_string() }),
        };
        let status = response.status();
        let retry_after = response
            .headers()
            .get(reqwest::header::RETRY_AFTER)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.trim().parse::<u64>().ok())
            .map(Duration::from_secs);
        let text = match response.text() {
            Ok(t) => t,
            Err(e) => {
                return Attempt::Retry {
                    error: ProviderError::Transport { attempts: 0, message: e.to_string() },
                    after: None,
                }
            }
        };
        match status {
            s if s.is_success() => match serde_json::from_str::<WireResponse>(&text) {
                Ok(parsed) => match parsed.choices.into_iter().next().and_then(|c| c.message.content) {
                    Some(content) => Attempt::Done(content),
                    None => Attempt::Fail(ProviderError::Protocol("response has no message content".into())),
                },
                Err(e) => Attempt::Fail(ProviderError::Protocol(e.to_string())),
            },
            StatusCode::UNAUTHORIZED | StatusCode::FORBIDDEN => {
                Attempt::Fail(ProviderError::AuthError(format!("HTTP {}: {}", status.as_u16(), text)))
            }
            StatusCode::TOO_MANY_REQUESTS => {
                Attempt::Retry { error: ProviderError::RateLimited { attempts: 0 }, after: retry_after }
            }
            s if s.is_server_error() => Attempt::Retry {
                error: ProviderError::Transport { attempts: 0, message: format!("HTTP {}", s.as_u16()) },
                after: retry_after,
            },
            s => Attempt::Fail(ProviderError::Status { status: s.as_u16(), body: text }),
        }
    }
}

fn with_attempts(error: ProviderError, n: u32) -> ProviderError {
    match error {
        ProviderError::RateLimited { .. } => ProviderError::RateLimited { attempts: n },
        ProviderError::Transport { message, .. } => ProviderError::Transport { attempts: n, message },
        other => other,
    }
}

impl Provider for HttpChatProvider {
    fn complete(&self, prompt: &PromptSpec, config: &ModelConfig) -> Result<CompletionResult, ProviderError> {
        config.validate()?;
        let body = wire_request(prompt, config);
        let started = Instant::now();
        let mut attempts = 0;
        loop {
            attempts += 1;
            match self.attempt(&body) {
                Attempt::Done(text) => {
                    return Ok(CompletionResult { text, latency: started.elapsed(), attempt_count: attempts })
                }
                Attempt::Fail(error) => return Err(error),
                Attempt::Retry { error, after } => {
                    if attempts >= self.retry.max_attempts {
                        return Err(with_attempts(error, attempts));
                    }
                    let backoff = self.retry.delay(attempts - 1);
                    let wait = after.map_or(backoff, |a| a.max(backoff)).min(self.retry.max_delay);
                    thread::sleep(wait);
                }
            }
        }
    }
}
