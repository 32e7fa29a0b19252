//! Advisor-guided escape from a detected tarpit.

use std::fmt;
use std::sync::OnceLock;

use rand::Rng;
use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::advisor::Advisor;
use crate::detector::{has_tarpit, DetectorConfig, StateSequence};
use crate::device::{CrashRecord, Device};
use crate::error::{Error, Result};
use crate::memory::{Dispatch, MemoryConfig, TarpitMemory};
use crate::ui::{build_action_space, ActionSpace, InteractionType, UiEvent, UiState};

pub const DEFAULT_TEXT_PAYLOAD: &str = "test";

const TEMPLATE: &str = include_str!("../templates/escape_prompt.txt");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EscapeConfig {
    pub max_retry: usize,
}

impl EscapeConfig {
    pub fn new(max_retry: usize) -> Result<Self> {
        if max_retry == 0 {
            return Err(Error::InvalidConfig("max_retry must be at least 1".into()));
        }
        Ok(Self { max_retry })
    }
}

impl Default for EscapeConfig {
    fn default() -> Self {
        Self { max_retry: 10 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prompt {
    pub role_section: String,
    pub task_section: String,
    pub ui_section: String,
    pub history_section: String,
    pub question_section: String,
}

impl Prompt {
    pub fn render(&self) -> String {
        format!(
            "# Role\n{}\n\n# Task\n{}\n\n# UI\n{}\n\n# Attempt history\n{}\n\n# Question\n{}\n",
            self.role_section,
            self.task_section,
            self.ui_section,
            self.history_section,
            self.question_section
        )
    }
}

impl fmt::Display for Prompt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

struct Template {
    role: String,
    task: String,
    question: String,
}

fn template() -> &'static Template {
    static PARSED: OnceLock<Template> = OnceLock::new();
    PARSED.get_or_init(|| {
        let mut sections = std::collections::HashMap::new();
        let mut current: Option<&str> = None;
        for line in TEMPLATE.lines() {
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                current = Some(name);
                continue;
            }
            if let Some(name) = current {
                let body: &mut String = sections.entry(name).or_default();
                if !line.is_empty() {
                    if !body.is_empty() {
                        body.push('\n');
                    }
                    body.push_str(line);
                }
            }
        }
        let mut take = |name: &str| sections.remove(name).expect("template section present");
        Template {
            role: take("role"),
            task: take("task"),
            question: take("question"),
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttemptSource {
    Reuse,
    Advisor,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttemptOutcome {
    StillTrapped,
    Escaped,
    Crash,
    /// No event was executed (unparseable reply or advisor failure).
    Invalid(String),
}

impl fmt::Display for AttemptOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::StillTrapped => f.write_str("still_trapped"),
            Self::Escaped => f.write_str("escaped"),
            Self::Crash => f.write_str("crash"),
            Self::Invalid(reason) => write!(f, "invalid ({reason})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Attempt {
    pub source: AttemptSource,
    pub event: Option<UiEvent>,
    /// Human-readable description of the event as shown to the advisor.
    pub description: Option<String>,
    pub outcome: AttemptOutcome,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptExchange {
    pub prompt: String,
    pub response: String,
}

/// Local history of one escape episode.
#[derive(Debug, Clone)]
pub struct EscapeSession {
    pub tarpit_state: UiState,
    pub attempts: Vec<Attempt>,
    pub prompt_log: Vec<PromptExchange>,
}

impl EscapeSession {
    pub fn new(tarpit_state: UiState) -> Self {
        Self {
            tarpit_state,
            attempts: Vec::new(),
            prompt_log: Vec::new(),
        }
    }
}

pub fn describe_event(space: &ActionSpace, event: &UiEvent) -> String {
    let target = match space.origin(event.action_id) {
        Some(w) => w.describe(),
        None => "system navigation".to_string(),
    };
    format!("{} on {}", event.kind, target)
}

/// Serializes the state, action space and session history into a prompt.
pub fn build_prompt(state: &UiState, space: &ActionSpace, session: &EscapeSession) -> Prompt {
    let _ = state;
    let t = template();
    let ui_section = space
        .events()
        .iter()
        .map(|e| format!("ID {}: {}", e.action_id, describe_event(space, e)))
        .collect::<Vec<_>>()
        .join("\n");
    let history_section = if session.attempts.is_empty() {
        "(none)".to_string()
    } else {
        session
            .attempts
            .iter()
            .enumerate()
            .map(|(i, a)| match (&a.event, &a.description) {
                (Some(e), Some(d)) => format!(
                    "Attempt {}: ID {}: {} -> {}",
                    i + 1,
                    e.action_id,
                    d,
                    a.outcome
                ),
                (Some(e), None) => {
                    format!("Attempt {}: ID {} -> {}", i + 1, e.action_id, a.outcome)
                }
                (None, _) => format!("Attempt {}: no action executed -> {}", i + 1, a.outcome),
            })
            .collect::<Vec<_>>()
            .join("\n")
    };
    Prompt {
        role_section: t.role.clone(),
        task_section: t.task.clone(),
        ui_section,
        history_section,
        question_section: t.question.clone(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("no action id found in response")]
    NoIntegerFound,
    #[error("action id {0} is out of range")]
    IdOutOfRange(String),
}

fn action_id_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)action[\s_-]*id\D*?(\d+)").unwrap())
}

fn standalone_int_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\b(\d+)\b").unwrap())
}

fn quoted_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r#""([^"]*)""#).unwrap())
}

/// Maps an advisor reply onto an event of `space`.
pub fn parse_response(text: &str, space: &ActionSpace) -> Result<UiEvent, ParseError> {
    let digits = action_id_re()
        .captures(text)
        .or_else(|| standalone_int_re().captures(text))
        .map(|c| c.get(1).unwrap().as_str())
        .ok_or(ParseError::NoIntegerFound)?;
    let event = digits
        .parse::<u32>()
        .ok()
        .and_then(|id| space.get(id))
        .ok_or_else(|| ParseError::IdOutOfRange(digits.to_string()))?;
    let mut event = event.clone();
    if event.kind == InteractionType::TextInput {
        let payload = quoted_re()
            .captures(text)
            .map(|c| c[1].to_string())
            .unwrap_or_else(|| DEFAULT_TEXT_PAYLOAD.to_string());
        event.payload = Some(payload);
    }
    Ok(event)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Random,
    Escape,
    Reuse,
}

/// One event executed during an escape episode.
#[derive(Debug, Clone)]
pub struct ExecutedStep {
    pub event: UiEvent,
    pub phase: Phase,
    pub pre_state: usize,
    pub post_state: usize,
    pub crash: Option<CrashRecord>,
    pub forced_back: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum EscapeOutcome {
    Escaped {
        event: UiEvent,
        final_state: usize,
    },
    Exhausted {
        final_state: usize,
    },
    Crashed {
        crash: CrashRecord,
        final_state: usize,
    },
}

#[derive(Debug, Clone)]
pub struct EscapeReport {
    pub outcome: EscapeOutcome,
    pub session: EscapeSession,
    pub steps: Vec<ExecutedStep>,
    /// Index of the state the escaping event was executed on.
    pub pre_escape_state: Option<usize>,
}

/// Engine-side configuration of one escape session.
#[derive(Debug, Clone, Copy)]
pub struct EscapeParams {
    pub detector: DetectorConfig,
    pub memory: MemoryConfig,
    pub escape: EscapeConfig,
    /// When false every attempt is delegated to the advisor.
    pub reuse: bool,
}

/// Runs up to `max_retry` escape attempts from the last state of `states`,
/// then forces one back if the app is still trapped.
pub fn run_escape<D, R>(
    device: &mut D,
    states: &mut StateSequence,
    memory: &mut TarpitMemory,
    advisor: &mut dyn Advisor,
    params: &EscapeParams,
    rng: &mut R,
) -> EscapeReport
where
    D: Device + ?Sized,
    R: Rng + ?Sized,
{
    let mut session = EscapeSession::new(
        states
            .last()
            .expect("escape starts from a captured state")
            .clone(),
    );
    let mut steps = Vec::new();
    for _ in 0..params.escape.max_retry {
        let current = states
            .last()
            .expect("escape starts from a captured state")
            .clone();
        let space = build_action_space(&current);

        let dispatch = if params.reuse {
            let zeta: f64 = rng.gen();
            memory.dispatch(&current, zeta, &params.memory, rng)
        } else {
            Dispatch::Delegate
        };
        let (source, event) = match dispatch {
            Dispatch::Reuse { event, .. } => {
                let mapped = match space.find_equivalent(&event) {
                    Some(e) => UiEvent {
                        payload: event.payload.clone(),
                        ..e.clone()
                    },
                    None => event,
                };
                (AttemptSource::Reuse, mapped)
            }
            Dispatch::Delegate => {
                let prompt = build_prompt(&current, &space, &session);
                let reply = advisor.suggest(&prompt);
                let rendered = prompt.render();
                let parsed = match reply {
                    Ok(text) => {
                        session.prompt_log.push(PromptExchange {
                            prompt: rendered,
                            response: text.clone(),
                        });
                        parse_response(&text, &space).map_err(|e| e.to_string())
                    }
                    Err(e) => {
                        session.prompt_log.push(PromptExchange {
                            prompt: rendered,
                            response: format!("<error: {e}>"),
                        });
                        Err(e.to_string())
                    }
                };
                match parsed {
                    Ok(event) => (AttemptSource::Advisor, event),
                    Err(reason) => {
                        session.attempts.push(Attempt {
                            source: AttemptSource::Advisor,
                            event: None,
                            description: None,
                            outcome: AttemptOutcome::Invalid(reason),
                        });
                        continue;
                    }
                }
            }
        };

        let description = space
            .get(event.action_id)
            .filter(|e| e.kind == event.kind && e.bounds == event.bounds)
            .map(|_| describe_event(&space, &event));
        let pre_state = states.len() - 1;
        let step = device.execute(&event);
        let post_state = states.push(step.state);
        let phase = match source {
            AttemptSource::Reuse => Phase::Reuse,
            AttemptSource::Advisor => Phase::Escape,
        };
        steps.push(ExecutedStep {
            event: event.clone(),
            phase,
            pre_state,
            post_state,
            crash: step.crash.clone(),
            forced_back: false,
        });

        if let Some(crash) = step.crash {
            session.attempts.push(Attempt {
                source,
                event: Some(event),
                description,
                outcome: AttemptOutcome::Crash,
            });
            return EscapeReport {
                outcome: EscapeOutcome::Crashed {
                    crash,
                    final_state: post_state,
                },
                session,
                steps,
                pre_escape_state: None,
            };
        }
        if !has_tarpit(states, &params.detector) {
            let trapped_on = states.penultimate().expect("at least two states").clone();
            memory.record_escape(&trapped_on, event.clone(), &params.memory);
            session.attempts.push(Attempt {
                source,
                event: Some(event.clone()),
                description,
                outcome: AttemptOutcome::Escaped,
            });
            return EscapeReport {
                outcome: EscapeOutcome::Escaped {
                    event,
                    final_state: post_state,
                },
                session,
                steps,
                pre_escape_state: Some(pre_state),
            };
        }
        session.attempts.push(Attempt {
            source,
            event: Some(event),
            description,
            outcome: AttemptOutcome::StillTrapped,
        });
    }

    let current = states.last().expect("non-empty").clone();
    let back = build_action_space(&current).back().clone();
    let pre_state = states.len() - 1;
    let step = device.execute(&back);
    let post_state = states.push(step.state);
    steps.push(ExecutedStep {
        event: back,
        phase: Phase::Escape,
        pre_state,
        post_state,
        crash: step.crash.clone(),
        forced_back: true,
    });
    let outcome = match step.crash {
        Some(crash) => EscapeOutcome::Crashed {
            crash,
            final_state: post_state,
        },
        None => EscapeOutcome::Exhausted {
            final_state: post_state,
        },
    };
    EscapeReport {
        outcome,
        session,
        steps,
        pre_escape_state: None,
    }
}
