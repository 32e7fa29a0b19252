//! Escape-suggestion providers.

use std::collections::{BTreeMap, VecDeque};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::escape::Prompt;
use crate::sim::{AppModel, ScreenProbe, SCREEN_HEIGHT, SCREEN_WIDTH};
use crate::ui::{build_action_space_for, Rect};

pub const API_KEY_ENV: &str = "TARPIT_ESCAPE_API_KEY";

pub const SYSTEM_MESSAGE: &str = "You are an expert mobile app tester. You help an automated \
random tester leave screens where it is stuck by choosing exactly one UI action.";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AdvisorError {
    #[error("advisor request timed out")]
    Timeout,
    #[error("advisor returned HTTP status {0}")]
    Status(u16),
    #[error("malformed advisor response: {0}")]
    Malformed(String),
    #[error("advisor transport failure: {0}")]
    Transport(String),
    #[error("no recorded response for prompt {0}")]
    ReplayMiss(String),
    #[error("advisor misconfigured: {0}")]
    Config(String),
}

pub trait Advisor: Send {
    fn name(&self) -> &str;

    /// Returns the raw response text for one prompt.
    fn suggest(&mut self, prompt: &Prompt) -> Result<String, AdvisorError>;
}

impl<A: Advisor + ?Sized> Advisor for Box<A> {
    fn name(&self) -> &str {
        (**self).name()
    }

    fn suggest(&mut self, prompt: &Prompt) -> Result<String, AdvisorError> {
        (**self).suggest(prompt)
    }
}

/// Replays canned responses in order, repeating the last one forever.
#[derive(Debug, Clone)]
pub struct ScriptedAdvisor {
    queue: VecDeque<String>,
    last: String,
    calls: usize,
}

impl ScriptedAdvisor {
    pub fn new<I, S>(responses: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            queue: responses.into_iter().map(Into::into).collect(),
            last: String::new(),
            calls: 0,
        }
    }

    pub fn calls(&self) -> usize {
        self.calls
    }
}

impl Advisor for ScriptedAdvisor {
    fn name(&self) -> &str {
        "scripted"
    }

    fn suggest(&mut self, _prompt: &Prompt) -> Result<String, AdvisorError> {
        self.calls += 1;
        if let Some(next) = self.queue.pop_front() {
            self.last = next;
        }
        Ok(self.last.clone())
    }
}

/// Answers with a declared escape action of the current simulated screen.
/// With probability `noise` it answers a uniformly random valid id instead.
pub struct OracleAdvisor {
    model: Arc<AppModel>,
    probe: ScreenProbe,
    noise: f64,
    rng: ChaCha8Rng,
}

impl OracleAdvisor {
    pub fn new(model: Arc<AppModel>, probe: ScreenProbe, noise: f64, seed: u64) -> Self {
        Self {
            model,
            probe,
            noise: noise.clamp(0.0, 1.0),
            rng: ChaCha8Rng::seed_from_u64(seed ^ 0x0a4c_1e5e_ed00_0001),
        }
    }

    /// Action id the oracle considers correct on `screen_id`: the lowest
    /// declared escape, or back when none is declared.
    pub fn escape_id(model: &AppModel, screen_id: &str) -> Option<(u32, usize)> {
        let screen = model.screen_by_id(screen_id)?;
        let bounds = Rect::new(0, 0, SCREEN_WIDTH as i32, SCREEN_HEIGHT as i32).unwrap();
        let space = build_action_space_for(&screen.widgets, bounds);
        let declared = screen
            .def
            .escape_actions
            .iter()
            .filter_map(|a| {
                let wi = screen.widget_index(&a.widget)?;
                let widget_id = screen.widgets[wi].widget_id;
                space.events().iter().find(|e| {
                    e.kind == a.interaction
                        && space
                            .origin(e.action_id)
                            .is_some_and(|w| w.widget_id == widget_id)
                })
            })
            .map(|e| e.action_id)
            .min();
        Some((declared.unwrap_or(space.back().action_id), space.len()))
    }
}

impl Advisor for OracleAdvisor {
    fn name(&self) -> &str {
        "oracle"
    }

    fn suggest(&mut self, _prompt: &Prompt) -> Result<String, AdvisorError> {
        let screen = self.probe.current();
        let (id, len) = Self::escape_id(&self.model, &screen)
            .ok_or_else(|| AdvisorError::Transport(format!("unknown screen {screen:?}")))?;
        let id = if self.noise > 0.0 && self.rng.gen_bool(self.noise) {
            self.rng.gen_range(0..len as u32)
        } else {
            id
        };
        Ok(format!("Action ID: {id}"))
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
    messages: [ChatMessage<'a>; 2],
    temperature: f64,
}

/// Blocking client for a chat-completions endpoint.
pub struct HttpChatAdvisor {
    endpoint: String,
    model: String,
    api_key: Option<String>,
    temperature: f64,
    agent: ureq::Agent,
}

impl HttpChatAdvisor {
    pub fn new(
        endpoint: impl Into<String>,
        model: impl Into<String>,
        api_key: Option<String>,
        timeout: Duration,
    ) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Self {
            endpoint: endpoint.into(),
            model: model.into(),
            api_key,
            temperature: 0.0,
            agent,
        }
    }

    /// Reads the API key from `TARPIT_ESCAPE_API_KEY` when set.
    pub fn from_env(
        endpoint: impl Into<String>,
        model: impl Into<String>,
        timeout: Duration,
    ) -> Self {
        Self::new(endpoint, model, std::env::var(API_KEY_ENV).ok(), timeout)
    }

    pub fn with_temperature(mut self, temperature: f64) -> Self {
        self.temperature = temperature;
        self
    }

    pub fn request_body(&self, prompt: &Prompt) -> String {
        let user = prompt.render();
        let body = ChatRequest {
            model: &self.model,
            messages: [
                ChatMessage {
                    role: "system",
                    content: SYSTEM_MESSAGE,
                },
                ChatMessage {
                    role: "user",
                    content: &user,
                },
            ],
            temperature: self.temperature,
        };
        serde_json::to_string(&body).expect("request serializes")
    }
}

/// Extracts `choices[0].message.content`.
pub fn parse_chat_response(body: &str) -> Result<String, AdvisorError> {
    let value: serde_json::Value =
        serde_json::from_str(body).map_err(|e| AdvisorError::Malformed(e.to_string()))?;
    value
        .pointer("/choices/0/message/content")
        .and_then(|c| c.as_str())
        .map(str::to_string)
        .ok_or_else(|| AdvisorError::Malformed("missing choices[0].message.content".into()))
}

impl Advisor for HttpChatAdvisor {
    fn name(&self) -> &str {
        "http"
    }

    fn suggest(&mut self, prompt: &Prompt) -> Result<String, AdvisorError> {
        let mut request = self
            .agent
            .post(&self.endpoint)
            .header("Content-Type", "application/json");
        if let Some(key) = &self.api_key {
            request = request.header("Authorization", &format!("Bearer {key}"));
        }
        let mut response = request
            .send(self.request_body(prompt))
            .map_err(|e| match e {
                ureq::Error::Timeout(_) => AdvisorError::Timeout,
                ureq::Error::Io(io) if io.kind() == std::io::ErrorKind::TimedOut => {
                    AdvisorError::Timeout
                }
                other => AdvisorError::Transport(other.to_string()),
            })?;
        let status = response.status().as_u16();
        if !(200..300).contains(&status) {
            return Err(AdvisorError::Status(status));
        }
        let body = response.body_mut().read_to_string().map_err(|e| match e {
            ureq::Error::Timeout(_) => AdvisorError::Timeout,
            other => AdvisorError::Transport(other.to_string()),
        })?;
        parse_chat_response(&body)
    }
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct CassetteFile {
    entries: BTreeMap<String, String>,
}

pub fn prompt_key(prompt: &Prompt) -> String {
    Sha256::digest(prompt.render().as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Records responses of an inner advisor to a JSON cassette, or replays
/// them offline keyed by the SHA-256 of the rendered prompt.
pub struct CassetteAdvisor {
    path: PathBuf,
    cassette: CassetteFile,
    inner: Option<Box<dyn Advisor>>,
}

impl CassetteAdvisor {
    pub fn replay(path: impl AsRef<Path>) -> Result<Self, AdvisorError> {
        let path = path.as_ref().to_path_buf();
        let text = std::fs::read_to_string(&path)
            .map_err(|e| AdvisorError::Config(format!("{}: {e}", path.display())))?;
        let cassette = serde_json::from_str(&text)
            .map_err(|e| AdvisorError::Config(format!("{}: {e}", path.display())))?;
        Ok(Self {
            path,
            cassette,
            inner: None,
        })
    }

    /// Appends to an existing cassette when the file exists.
    pub fn record(path: impl AsRef<Path>, inner: Box<dyn Advisor>) -> Result<Self, AdvisorError> {
        let path = path.as_ref().to_path_buf();
        let cassette = match std::fs::read_to_string(&path) {
            Ok(text) => serde_json::from_str(&text)
                .map_err(|e| AdvisorError::Config(format!("{}: {e}", path.display())))?,
            Err(_) => CassetteFile::default(),
        };
        Ok(Self {
            path,
            cassette,
            inner: Some(inner),
        })
    }

    pub fn len(&self) -> usize {
        self.cassette.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cassette.entries.is_empty()
    }

    fn save(&self) -> Result<(), AdvisorError> {
        let text = serde_json::to_string_pretty(&self.cassette).expect("cassette serializes");
        std::fs::write(&self.path, text)
            .map_err(|e| AdvisorError::Transport(format!("{}: {e}", self.path.display())))
    }
}

impl Advisor for CassetteAdvisor {
    fn name(&self) -> &str {
        if self.inner.is_some() {
            "record"
        } else {
            "replay"
        }
    }

    fn suggest(&mut self, prompt: &Prompt) -> Result<String, AdvisorError> {
        let key = prompt_key(prompt);
        if let Some(hit) = self.cassette.entries.get(&key) {
            return Ok(hit.clone());
        }
        let Some(inner) = self.inner.as_mut() else {
            return Err(AdvisorError::ReplayMiss(key));
        };
        let response = inner.suggest(prompt)?;
        self.cassette.entries.insert(key, response.clone());
        self.save()?;
        Ok(response)
    }
}
