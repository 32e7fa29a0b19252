//! Screens, widgets and events as the engine sees them.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::phash::{Bitmap, PHash};

/// Screen-space rectangle; `left < right`, `top < bottom`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "[i32; 4]", into = "[i32; 4]")]
pub struct Rect {
    pub left: i32,
    pub top: i32,
    pub right: i32,
    pub bottom: i32,
}

impl Rect {
    pub fn new(left: i32, top: i32, right: i32, bottom: i32) -> Option<Self> {
        (left < right && top < bottom).then_some(Self {
            left,
            top,
            right,
            bottom,
        })
    }

    pub fn center(&self) -> (i32, i32) {
        (
            (self.left + self.right).div_euclid(2),
            (self.top + self.bottom).div_euclid(2),
        )
    }

    /// Edge-inclusive point membership.
    pub fn contains(&self, (x, y): (i32, i32)) -> bool {
        self.left <= x && x <= self.right && self.top <= y && y <= self.bottom
    }

    pub fn width(&self) -> i32 {
        self.right - self.left
    }

    pub fn height(&self) -> i32 {
        self.bottom - self.top
    }
}

impl TryFrom<[i32; 4]> for Rect {
    type Error = String;

    fn try_from([l, t, r, b]: [i32; 4]) -> Result<Self, String> {
        Rect::new(l, t, r, b).ok_or_else(|| format!("degenerate bounds [{l},{t},{r},{b}]"))
    }
}

impl From<Rect> for [i32; 4] {
    fn from(r: Rect) -> Self {
        [r.left, r.top, r.right, r.bottom]
    }
}

impl fmt::Display for Rect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{},{},{},{}]",
            self.left, self.top, self.right, self.bottom
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InteractionType {
    Click,
    LongClick,
    Scroll,
    Swipe,
    TextInput,
    Back,
}

impl InteractionType {
    pub const ALL: [InteractionType; 6] = [
        Self::Click,
        Self::LongClick,
        Self::Scroll,
        Self::Swipe,
        Self::TextInput,
        Self::Back,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Click => "click",
            Self::LongClick => "long_click",
            Self::Scroll => "scroll",
            Self::Swipe => "swipe",
            Self::TextInput => "text_input",
            Self::Back => "back",
        }
    }
}

impl fmt::Display for InteractionType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Widget {
    pub widget_id: u32,
    pub bounds: Rect,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resource_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub content_description: Option<String>,
    pub enabled: bool,
    pub interactions: Vec<InteractionType>,
}

impl Widget {
    pub fn is_interactive(&self) -> bool {
        self.enabled && !self.interactions.is_empty()
    }

    /// Short human-readable description built from the available attributes.
    pub fn describe(&self) -> String {
        let mut parts = Vec::new();
        if let Some(text) = &self.text {
            parts.push(format!("text \"{text}\""));
        }
        if let Some(rid) = &self.resource_id {
            parts.push(format!("resource-id \"{rid}\""));
        }
        if let Some(desc) = &self.content_description {
            parts.push(format!("content-description \"{desc}\""));
        }
        if parts.is_empty() {
            format!("widget at {}", self.bounds)
        } else {
            format!("widget {}", parts.join(", "))
        }
    }
}

/// One observed screen. `true_screen_id` is simulator ground truth: the
/// harness reads it for metrics, engine decisions never do.
#[derive(Debug, Clone)]
pub struct UiState {
    pub screenshot: Arc<Bitmap>,
    pub widgets: Arc<Vec<Widget>>,
    pub true_screen_id: String,
}

impl UiState {
    pub fn phash(&self) -> PHash {
        self.screenshot.phash()
    }

    pub fn screen_bounds(&self) -> Rect {
        Rect {
            left: 0,
            top: 0,
            right: self.screenshot.width() as i32,
            bottom: self.screenshot.height() as i32,
        }
    }
}

/// An executable interaction `<id, bounds, type>`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct UiEvent {
    pub action_id: u32,
    pub bounds: Rect,
    #[serde(rename = "type")]
    pub kind: InteractionType,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payload: Option<String>,
}

impl UiEvent {
    /// Identity ignoring the per-screen action id.
    pub fn same_action(&self, other: &UiEvent) -> bool {
        self.kind == other.kind && self.bounds == other.bounds && self.payload == other.payload
    }
}

/// Discretized set of executable events on one state. Ids are dense
/// `0..len` and equal the index into `events`.
#[derive(Debug, Clone)]
pub struct ActionSpace {
    events: Vec<UiEvent>,
    origins: Vec<Option<usize>>,
    widgets: Vec<Widget>,
    synthetic_back: bool,
}

impl ActionSpace {
    pub fn events(&self) -> &[UiEvent] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn get(&self, action_id: u32) -> Option<&UiEvent> {
        self.events.get(action_id as usize)
    }

    /// The widget an event was derived from; `None` for the synthetic back.
    pub fn origin(&self, action_id: u32) -> Option<&Widget> {
        self.origins
            .get(action_id as usize)
            .copied()
            .flatten()
            .map(|i| &self.widgets[i])
    }

    /// Valid widgets in linearized order.
    pub fn widgets(&self) -> &[Widget] {
        &self.widgets
    }

    pub fn has_synthetic_back(&self) -> bool {
        self.synthetic_back
    }

    /// Number of events contributed by widgets (excludes a synthetic back).
    pub fn widget_event_count(&self) -> usize {
        self.events.len() - usize::from(self.synthetic_back)
    }

    pub fn back(&self) -> &UiEvent {
        self.events
            .iter()
            .rev()
            .find(|e| e.kind == InteractionType::Back)
            .expect("every action space exposes back")
    }

    /// Finds the event in this space equivalent to `event` (same type,
    /// bounds and payload), ignoring action ids. Text input matches on
    /// type and bounds alone since payloads are free-form.
    pub fn find_equivalent(&self, event: &UiEvent) -> Option<&UiEvent> {
        self.events
            .iter()
            .find(|e| e.kind == event.kind && e.bounds == event.bounds)
    }
}

/// Keeps the enabled interactive widgets whose centre lies in no other
/// interactive widget's bounds. Input order is preserved.
pub fn get_valid_widgets(widgets: &[Widget]) -> Vec<Widget> {
    let leaves: Vec<&Widget> = widgets.iter().filter(|w| w.is_interactive()).collect();
    leaves
        .iter()
        .enumerate()
        .filter(|(i, w)| {
            let center = w.bounds.center();
            !leaves
                .iter()
                .enumerate()
                .any(|(j, other)| j != *i && other.bounds.contains(center))
        })
        .map(|(_, w)| (*w).clone())
        .collect()
}

/// Top-to-bottom, left-to-right, then by widget id.
pub fn linearize(mut widgets: Vec<Widget>) -> Vec<Widget> {
    widgets.sort_by_key(|w| (w.bounds.top, w.bounds.left, w.widget_id));
    widgets
}

pub fn build_action_space(state: &UiState) -> ActionSpace {
    build_action_space_for(&state.widgets, state.screen_bounds())
}

pub fn build_action_space_for(widgets: &[Widget], screen: Rect) -> ActionSpace {
    let widgets = linearize(get_valid_widgets(widgets));
    let mut events = Vec::new();
    let mut origins = Vec::new();
    for (wi, widget) in widgets.iter().enumerate() {
        let mut seen = Vec::with_capacity(widget.interactions.len());
        for &kind in &widget.interactions {
            if seen.contains(&kind) {
                continue;
            }
            seen.push(kind);
            let bounds = if kind == InteractionType::Back {
                screen
            } else {
                widget.bounds
            };
            events.push(UiEvent {
                action_id: events.len() as u32,
                bounds,
                kind,
                payload: None,
            });
            origins.push(Some(wi));
        }
    }
    let synthetic_back = !events.iter().any(|e| e.kind == InteractionType::Back);
    if synthetic_back {
        events.push(UiEvent {
            action_id: events.len() as u32,
            bounds: screen,
            kind: InteractionType::Back,
            payload: None,
        });
        origins.push(None);
    }
    ActionSpace {
        events,
        origins,
        widgets,
        synthetic_back,
    }
}
