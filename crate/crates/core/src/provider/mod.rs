//! Chat-completion backends.
//!
//! [`HttpChatProvider`] speaks the OpenAI-compatible `/chat/completions`
//! protocol. The remaining providers are deterministic and need no network:
//! they replay recorded responses or synthesize answers from the gold labels.

mod fixture;
mod http;

use std::collections::HashMap;
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::corpus::GoldInstance;
use crate::prompt::PromptSpec;
use crate::scale::Label;

pub use fixture::{load_fixture, record_fixture, FixtureEntry, FixtureError};
pub use http::{request_body, Credential, HttpChatProvider, RetryPolicy, API_KEY_ENV};

pub const DEFAULT_MAX_TOKENS: u32 = 16;

/// Model name and sampling parameters sent with every request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub model_name: String,
    pub temperature: f64,
    pub top_p: f64,
    #[serde(default = "default_max_tokens")]
    pub max_tokens: Option<u32>,
    #[serde(default)]
    pub stop: Option<Vec<String>>,
}

fn default_max_tokens() -> Option<u32> {
    Some(DEFAULT_MAX_TOKENS)
}

impl ModelConfig {
    pub fn new(model_name: impl Into<String>, temperature: f64, top_p: f64) -> Self {
        ModelConfig {
            model_name: model_name.into(),
            temperature,
            top_p,
            max_tokens: default_max_tokens(),
            stop: None,
        }
    }

    pub fn validate(&self) -> Result<(), ProviderError> {
        let invalid = |msg: String| Err(ProviderError::InvalidConfig(msg));
        if self.model_name.trim().is_empty() {
            return invalid("model name is empty".into());
        }
        if !(0.0..=2.0).contains(&self.temperature) {
            return invalid(format!("temperature {} outside [0, 2]", self.temperature));
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return invalid(format!("top_p {} outside (0, 1]", self.top_p));
        }
        if self.max_tokens == Some(0) {
            return invalid("max_tokens must be positive".into());
        }
        Ok(())
    }

    pub fn with_sampling(&self, temperature: f64, top_p: f64) -> Self {
        ModelConfig { temperature, top_p, ..self.clone() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompletionResult {
    pub text: String,
    pub latency: Duration,
    pub attempt_count: u32,
}

impl CompletionResult {
    fn immediate(text: String) -> Self {
        CompletionResult { text, latency: Duration::ZERO, attempt_count: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProviderError {
    #[error("authentication failed: {0}")]
    AuthError(String),
    #[error("rate limited after {attempts} attempts")]
    RateLimited { attempts: u32 },
    #[error("transport failure after {attempts} attempts: {message}")]
    Transport { attempts: u32, message: String },
    #[error("request rejected with HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("malformed response: {0}")]
    Protocol(String),
    #[error("replay fixture has no response for `{0}`")]
    FixtureMiss(String),
    #[error("no gold label for `{0}`")]
    UnknownInstance(String),
    #[error("invalid model configuration: {0}")]
    InvalidConfig(String),
}

impl ProviderError {
    /// Errors that make every further request pointless. Anything else is
    /// recorded against the single instance and the trial continues.
    pub fn is_fatal(&self) -> bool {
        matches!(
            self,
            ProviderError::AuthError(_)
                | ProviderError::Status { .. }
                | ProviderError::FixtureMiss(_)
                | ProviderError::UnknownInstance(_)
                | ProviderError::InvalidConfig(_)
        )
    }
}

/// A chat-completion backend. Implementations are shared across the worker
/// threads of a trial.
pub trait Provider: Send + Sync {
    fn complete(&self, prompt: &PromptSpec, config: &ModelConfig) -> Result<CompletionResult, ProviderError>;
}

impl<P: Provider + ?Sized> Provider for &P {
    fn complete(&self, prompt: &PromptSpec, config: &ModelConfig) -> Result<CompletionResult, ProviderError> {
        (**self).complete(prompt, config)
    }
}

impl<P: Provider + ?Sized> Provider for Box<P> {
    fn complete(&self, prompt: &PromptSpec, config: &ModelConfig) -> Result<CompletionResult, ProviderError> {
        (**self).complete(prompt, config)
    }
}

fn gold_map(gold: &[GoldInstance]) -> HashMap<String, Label> {
    gold.iter().map(|g| (g.pair.instance_id.clone(), g.gold_label)).collect()
}

/// Returns recorded responses keyed by instance id.
#[derive(Debug, Clone)]
pub struct ReplayProvider {
    responses: HashMap<String, String>,
}

impl ReplayProvider {
    pub fn new(entries: Vec<FixtureEntry>) -> Result<Self, FixtureError> {
        let mut responses = HashMap::with_capacity(entries.len());
        for entry in entries {
            if responses.contains_key(&entry.instance_id) {
                return Err(FixtureError::DuplicateId(entry.instance_id));
            }
            responses.insert(entry.instance_id, entry.response);
        }
        Ok(ReplayProvider { responses })
    }

    pub fn from_fixture(content: &str) -> Result<Self, FixtureError> {
        ReplayProvider::new(load_fixture(content)?)
    }

    pub fn covers<'a>(&self, mut ids: impl Iterator<Item = &'a str>) -> Result<(), ProviderError> {
        match ids.find(|id| !self.responses.contains_key(*id)) {
            Some(id) => Err(ProviderError::FixtureMiss(id.to_string())),
            None => Ok(()),
        }
    }
}

impl Provider for ReplayProvider {
    fn complete(&self, prompt: &PromptSpec, _config: &ModelConfig) -> Result<CompletionResult, ProviderError> {
        self.responses
            .get(&prompt.instance_id)
            .map(|text| CompletionResult::immediate(text.clone()))
            .ok_or_else(|| ProviderError::FixtureMiss(prompt.instance_id.clone()))
    }
}

/// Answers every instance with its gold label.
#[derive(Debug, Clone)]
pub struct ScriptedGoldProvider {
    gold: HashMap<String, Label>,
}

impl ScriptedGoldProvider {
    pub fn new(gold: &[GoldInstance]) -> Self {
        ScriptedGoldProvider { gold: gold_map(gold) }
    }
}

impl Provider for ScriptedGoldProvider {
    fn complete(&self, prompt: &PromptSpec, _config: &ModelConfig) -> Result<CompletionResult, ProviderError> {
        self.gold
            .get(&prompt.instance_id)
            .map(|label| CompletionResult::immediate(label.to_string()))
            .ok_or_else(|| ProviderError::UnknownInstance(prompt.instance_id.clone()))
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ConstantProvider(pub Label);

impl Provider for ConstantProvider {
    fn complete(&self, _prompt: &PromptSpec, _config: &ModelConfig) -> Result<CompletionResult, ProviderError> {
        Ok(CompletionResult::immediate(self.0.to_string()))
    }
}

/// Returns the gold label with probability `accuracy`, otherwise one of the
/// other three labels uniformly. Each draw is seeded from the provider seed,
/// the instance id and the sampling parameters, so results do not depend on
/// call order or platform.
#[derive(Debug, Clone)]
pub struct SeededNoiseProvider {
    seed: u64,
    accuracy: f64,
    gold: HashMap<String, Label>,
}

impl SeededNoiseProvider {
    pub fn new(seed: u64, accuracy: f64, gold: &[GoldInstance]) -> Result<Self, ProviderError> {
        if !(0.0..=1.0).contains(&accuracy) {
            return Err(ProviderError::InvalidConfig(format!("accuracy {accuracy} outside [0, 1]")));
        }
        Ok(SeededNoiseProvider { seed, accuracy, gold: gold_map(gold) })
    }

    fn rng_for(&self, instance_id: &str, config: &ModelConfig) -> ChaCha8Rng {
        let mut hasher = Sha256::new();
        hasher.update(self.seed.to_le_bytes());
        hasher.update(config.temperature.to_bits().to_le_bytes());
        hasher.update(config.top_p.to_bits().to_le_bytes());
        hasher.update(instance_id.as_bytes());
        ChaCha8Rng::from_seed(hasher.finalize().into())
    }
}

impl Provider for SeededNoiseProvider {
    fn complete(&self, prompt: &PromptSpec, config: &ModelConfig) -> Result<CompletionResult, ProviderError> {
        let gold = *self
            .gold
            .get(&prompt.instance_id)
            .ok_or_else(|| ProviderError::UnknownInstance(prompt.instance_id.clone()))?;
        let mut rng = self.rng_for(&prompt.instance_id, config);
        let label = if rng.random_bool(self.accuracy) {
            gold
        } else {
            let offset = rng.random_range(1..4u8);
            Label::from_index((gold.index() + usize::from(offset)) % 4).expect("index in range")
        };
        Ok(CompletionResult::immediate(label.to_string()))
    }
}
