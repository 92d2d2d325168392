use std::collections::{BTreeMap, HashMap, VecDeque};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use super::icl::{select_icl_examples, IclError};
use super::parse::{parse_level_response, LevelParseError};
use super::prompt::{build_prediction_prompt, PromptError, LEVEL_RULES};
use super::{persistence_levels, ForecastContext, ForecastWindow, Forecaster};
use crate::demand::{time_of_day_phrase, weekday_name, Archetype, EventRecord, HOURS_PER_DAY};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

impl ChatMessage {
    pub fn new(role: &str, content: &str) -> Self {
        ChatMessage { role: role.to_string(), content: content.to_string() }
    }

    pub fn system(content: &str) -> Self {
        Self::new("system", content)
    }

    pub fn user(content: &str) -> Self {
        Self::new("user", content)
    }

    pub fn assistant(content: &str) -> Self {
        Self::new("assistant", content)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmClientConfig {
    /// Endpoint root; requests go to `{base_url}/chat/completions`.
    pub base_url: String,
    pub model: String,
    /// Name of the environment variable holding the bearer token.
    pub api_key_env: String,
    pub temperature: f64,
    pub timeout_secs: f64,
    pub max_retries: u32,
    /// Prior exchanges replayed per session.
    pub session_memory_depth: usize,
    /// First retry delay; doubles on each further retry.
    pub backoff_ms: u64,
    /// Prefix for session ids, so clients sharing a backend keep separate memories.
    pub namespace: String,
}

impl Default for LlmClientConfig {
    fn default() -> Self {
        LlmClientConfig {
            base_url: "https://api.openai.com/v1".to_string(),
            model: "gpt-4o".to_string(),
            api_key_env: "OPENAI_API_KEY".to_string(),
            temperature: 0.0,
            timeout_secs: 60.0,
            max_retries: 3,
            session_memory_depth: 4,
            backoff_ms: 500,
            namespace: "predict".to_string(),
        }
    }
}

impl LlmClientConfig {
    pub fn validate(&self) -> Result<(), LlmError> {
        if !(self.timeout_secs > 0.0 && self.timeout_secs.is_finite()) {
            return Err(LlmError::InvalidConfig(format!("timeout must be positive, got {}", self.timeout_secs)));
        }
        if self.base_url.is_empty() || self.model.is_empty() {
            return Err(LlmError::InvalidConfig("base_url and model must be set".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LlmError {
    #[error("invalid client config: {0}")]
    InvalidConfig(String),
    #[error("no messages to send")]
    EmptyMessages,
    #[error("transport error: {0}")]
    Transport(String),
    #[error("HTTP status {0}")]
    Status(u16),
    #[error("response body is not JSON: {0}")]
    NonJson(String),
    #[error("response has no choices[0].message.content")]
    MissingChoices,
    #[error("gave up after {attempts} attempts: {last}")]
    Exhausted { attempts: u32, last: Box<LlmError> },
}

impl LlmError {
    fn retryable(&self) -> bool {
        match self {
            LlmError::Transport(_) => true,
            LlmError::Status(code) => *code == 429 || *code >= 500,
            _ => false,
        }
    }
}

/// Blocking chat-completions client with per-session memory.
#[derive(Debug)]
pub struct LlmClient {
    config: LlmClientConfig,
    agent: ureq::Agent,
    memory: HashMap<String, VecDeque<(String, String)>>,
}

impl LlmClient {
    pub fn new(config: LlmClientConfig) -> Result<Self, LlmError> {
        config.validate()?;
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs_f64(config.timeout_secs)))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(LlmClient { config, agent, memory: HashMap::new() })
    }

    pub fn config(&self) -> &LlmClientConfig {
        &self.config
    }

    fn session_key(&self, session_id: &str) -> String {
        format!("{}:{}", self.config.namespace, session_id)
    }

    /// Prior (user, assistant) exchanges kept for a session.
    pub fn session_memory(&self, session_id: &str) -> Vec<(String, String)> {
        self.memory
            .get(&self.session_key(session_id))
            .map(|m| m.iter().cloned().collect())
            .unwrap_or_default()
    }

    /// Sends `messages` (after any leading system messages, the session's
    /// remembered exchanges are inserted) and returns the reply text.
    pub fn chat_call(&mut self, session_id: &str, messages: &[ChatMessage]) -> Result<String, LlmError> {
        if messages.is_empty() {
            return Err(LlmError::EmptyMessages);
        }
        let key = self.session_key(session_id);
        let split = messages.iter().take_while(|m| m.role == "system").count();
        let mut full: Vec<ChatMessage> = messages[..split].to_vec();
        if let Some(history) = self.memory.get(&key) {
            for (user, assistant) in history {
                full.push(ChatMessage::user(user));
                full.push(ChatMessage::assistant(assistant));
            }
        }
        full.extend_from_slice(&messages[split..]);
        let body = json!({
            "model": self.config.model,
            "temperature": self.config.temperature,
            "messages": full,
        });

        let mut attempt = 0;
        let reply = loop {
            match self.post_once(&body) {
                Ok(text) => break text,
                Err(e) if e.retryable() && attempt < self.config.max_retries => {
                    let delay = self.config.backoff_ms.saturating_mul(1 << attempt.min(16));
                    log::warn!("chat call failed ({e}); retrying in {delay} ms");
                    std::thread::sleep(Duration::from_millis(delay));
                    attempt += 1;
                }
                Err(e) if e.retryable() => {
                    return Err(LlmError::Exhausted { attempts: attempt + 1, last: Box::new(e) })
                }
                Err(e) => return Err(e),
            }
        };

        if self.config.session_memory_depth > 0 {
            let last_user = messages.last().map(|m| m.content.clone()).unwrap_or_default();
            let history = self.memory.entry(key).or_default();
            history.push_back((last_user, reply.clone()));
            while history.len() > self.config.session_memory_depth {
                history.pop_front();
            }
        }
        Ok(reply)
    }

    fn post_once(&self, body: &Value) -> Result<String, LlmError> {
        let url = format!("{}/chat/completions", self.config.base_url.trim_end_matches('/'));
        let mut request = self.agent.post(&url).header("Content-Type", "application/json");
        if let Ok(key) = std::env::var(&self.config.api_key_env) {
            request = request.header("Authorization", &format!("Bearer {key}"));
        }
        let mut response = request.send_json(body).map_err(|e| LlmError::Transport(e.to_string()))?;
        let status = response.status().as_u16();
        if !(200..300).contains(&status) {
            return Err(LlmError::Status(status));
        }
        let text = response
            .body_mut()
            .read_to_string()
            .map_err(|e| LlmError::Transport(e.to_string()))?;
        let value: Value = serde_json::from_str(&text).map_err(|_| LlmError::NonJson(truncate(&text, 200)))?;
        value
            .pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or(LlmError::MissingChoices)
    }
}

fn truncate(s: &str, n: usize) -> String {
    s.chars().take(n).collect()
}

/// A forecast call that fell back to persistence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FallbackEvent {
    pub t: i64,
    pub region: u32,
    pub reason: String,
}

/// Forecasts each region by prompting the chat model with the upcoming
/// event narratives and that region's in-context examples.
#[derive(Debug)]
pub struct LlmForecaster {
    client: LlmClient,
    window: usize,
    region_archetypes: BTreeMap<u32, Archetype>,
    examples: BTreeMap<u32, Vec<(String, u8)>>,
    level_rules: String,
    fallbacks: Vec<FallbackEvent>,
}

impl LlmForecaster {
    pub fn new(
        client: LlmClient,
        window: usize,
        region_archetypes: BTreeMap<u32, Archetype>,
        examples: BTreeMap<u32, Vec<(String, u8)>>,
    ) -> Self {
        LlmForecaster {
            client,
            window,
            region_archetypes,
            examples,
            level_rules: LEVEL_RULES.to_string(),
            fallbacks: Vec::new(),
        }
    }

    /// Selects `k` examples per region from `library` (which should hold
    /// training-split events only).
    pub fn from_library(
        client: LlmClient,
        window: usize,
        region_archetypes: BTreeMap<u32, Archetype>,
        library: &[EventRecord],
        k: usize,
        seed: u64,
    ) -> Result<Self, IclError> {
        let mut examples = BTreeMap::new();
        for (&region, &arch) in &region_archetypes {
            let picked = select_icl_examples(library, arch, k, seed)?;
            examples.insert(region, picked.into_iter().map(|e| (e.text, e.level)).collect());
        }
        Ok(Self::new(client, window, region_archetypes, examples))
    }

    pub fn fallbacks(&self) -> &[FallbackEvent] {
        &self.fallbacks
    }

    pub fn client(&self) -> &LlmClient {
        &self.client
    }

    fn event_block(&self, t: i64, region: u32, context: &ForecastContext) -> String {
        let mut lines = Vec::new();
        for h in 1..=self.window as i64 {
            let hour = t + h;
            if hour < 0 {
                continue;
            }
            let hour = hour as usize;
            if let Some(text) = context.event(region, hour) {
                let (day, hod) = (hour / HOURS_PER_DAY, hour % HOURS_PER_DAY);
                lines.push(format!(
                    "- {} {:02}:00 ({}): {}",
                    weekday_name(day),
                    hod,
                    time_of_day_phrase(hod),
                    text
                ));
            }
        }
        lines.join("\n")
    }

    fn predict_region(&mut self, t: i64, region: u32, context: &ForecastContext) -> Result<Vec<u8>, String> {
        let arch = *self.region_archetypes.get(&region).ok_or("region has no building type")?;
        let examples = self.examples.get(&region).map(Vec::as_slice).unwrap_or(&[]);
        let events = self.event_block(t, region, context);
        let prompt = build_prediction_prompt(&events, arch, examples, self.window, &self.level_rules)
            .map_err(|e: PromptError| e.to_string())?;
        let messages = prompt.to_messages();
        let session = format!("region-{region}");
        let mut last: Option<LevelParseError> = None;
        for _ in 0..2 {
            let reply = self.client.chat_call(&session, &messages).map_err(|e| e.to_string())?;
            match parse_level_response(&reply, self.window) {
                Ok(levels) => return Ok(levels),
                Err(e) => last = Some(e),
            }
        }
        Err(last.map(|e| e.to_string()).unwrap_or_default())
    }
}

impl Forecaster for LlmForecaster {
    fn window(&self) -> usize {
        self.window
    }

    fn forecast(&mut self, t: i64, context: &ForecastContext) -> ForecastWindow {
        let regions: Vec<u32> = self.region_archetypes.keys().copied().collect();
        if self.window == 0 {
            return ForecastWindow::empty(t, regions.len());
        }
        let mut levels = BTreeMap::new();
        for region in regions {
            let seq = match self.predict_region(t, region, context) {
                Ok(seq) => seq,
                Err(reason) => {
                    log::warn!("LLM forecast for region {region} at hour {t} fell back to persistence: {reason}");
                    self.fallbacks.push(FallbackEvent { t, region, reason });
                    persistence_levels(t, self.window, region, context)
                }
            };
            levels.insert(region, seq);
        }
        ForecastWindow { t, window: self.window, levels }
    }
}
