//! App models: screens, widgets, transitions and the scenario file format.

use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::sim::render::{self, MAX_VISUAL_GROUP, SCREEN_HEIGHT, SCREEN_WIDTH};
use crate::ui::{InteractionType, Rect, Widget};

/// What happens when an interaction fires.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Effect {
    Goto {
        screen: String,
    },
    /// Navigate without pushing the current screen.
    Replace {
        screen: String,
    },
    SelfLoop,
    Crash {
        signature: String,
    },
    BackPop,
    SetFlag {
        flag: String,
    },
    ClearFlag {
        flag: String,
    },
    GuardedGoto {
        flag: String,
        then: String,
        #[serde(rename = "else")]
        otherwise: String,
    },
    Guarded {
        flag: String,
        then: Box<Effect>,
        #[serde(rename = "else")]
        otherwise: Box<Effect>,
    },
    Seq {
        steps: Vec<Effect>,
    },
}

impl Effect {
    fn visit<'a>(&'a self, f: &mut impl FnMut(&'a Effect)) {
        f(self);
        match self {
            Effect::Guarded {
                then, otherwise, ..
            } => {
                then.visit(f);
                otherwise.visit(f);
            }
            Effect::Seq { steps } => steps.iter().for_each(|s| s.visit(f)),
            _ => {}
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WidgetDef {
    #[serde(rename = "ref")]
    pub widget_ref: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub widget_id: Option<u32>,
    pub bounds: Rect,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resource_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub content_description: Option<String>,
    #[serde(default = "enabled_default")]
    pub enabled: bool,
    pub interactions: Vec<InteractionType>,
}

fn enabled_default() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActionRef {
    pub widget: String,
    pub interaction: InteractionType,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScreenDef {
    pub id: String,
    pub visual_group: u32,
    #[serde(default)]
    pub render_salt: u64,
    /// Ground truth: this screen is a tarpit (dominant self-loop region).
    #[serde(default)]
    pub tarpit: bool,
    pub widgets: Vec<WidgetDef>,
    #[serde(default)]
    pub escape_actions: Vec<ActionRef>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransitionDef {
    pub screen: String,
    pub widget: String,
    pub interaction: InteractionType,
    pub effect: Effect,
}

/// On-disk scenario document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub screens: Vec<ScreenDef>,
    pub initial: String,
    #[serde(default)]
    pub transitions: Vec<TransitionDef>,
    #[serde(default)]
    pub flags: Vec<String>,
}

impl Scenario {
    pub fn to_json(&self) -> Result<String> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        Ok(text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::ScenarioParse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })
    }
}

/// A validated screen with widgets resolved to engine types.
#[derive(Debug, Clone)]
pub struct Screen {
    pub def: ScreenDef,
    pub widgets: Vec<Widget>,
}

impl Screen {
    pub fn id(&self) -> &str {
        &self.def.id
    }

    pub fn widget_index(&self, widget_ref: &str) -> Option<usize> {
        self.def
            .widgets
            .iter()
            .position(|w| w.widget_ref == widget_ref)
    }
}

/// Validated, immutable simulated app.
#[derive(Debug, Clone)]
pub struct AppModel {
    scenario: Scenario,
    screens: Vec<Screen>,
    index: HashMap<String, usize>,
    initial: usize,
    transitions: HashMap<(usize, usize, InteractionType), Effect>,
    fingerprint: String,
}

impl AppModel {
    /// Validates every reference and the render calibration contract.
    pub fn from_scenario(scenario: Scenario) -> Result<Self> {
        let invalid = |msg: String| Err(Error::ScenarioInvalid(msg));
        if scenario.screens.is_empty() {
            return invalid("scenario has no screens (no initial screen)".into());
        }
        let flags: BTreeSet<&str> = scenario.flags.iter().map(String::as_str).collect();
        let mut index = HashMap::new();
        let mut screens = Vec::with_capacity(scenario.screens.len());
        for (si, def) in scenario.screens.iter().enumerate() {
            if index.insert(def.id.clone(), si).is_some() {
                return invalid(format!("duplicate screen id {:?}", def.id));
            }
            if def.visual_group == 0 || def.visual_group > MAX_VISUAL_GROUP {
                return invalid(format!(
                    "screen {:?}: visual_group {} outside 1..={MAX_VISUAL_GROUP} (0 is reserved for the restart screen)",
                    def.id, def.visual_group
                ));
            }
            let mut refs = BTreeSet::new();
            let mut ids = BTreeSet::new();
            let mut widgets = Vec::with_capacity(def.widgets.len());
            for (wi, w) in def.widgets.iter().enumerate() {
                if !refs.insert(w.widget_ref.as_str()) {
                    return invalid(format!(
                        "screen {:?}: duplicate widget ref {:?}",
                        def.id, w.widget_ref
                    ));
                }
                let widget_id = w.widget_id.unwrap_or(wi as u32);
                if !ids.insert(widget_id) {
                    return invalid(format!(
                        "screen {:?}: duplicate widget id {widget_id}",
                        def.id
                    ));
                }
                if w.interactions.is_empty() {
                    return invalid(format!(
                        "screen {:?}: widget {:?} has no interactions",
                        def.id, w.widget_ref
                    ));
                }
                let b = w.bounds;
                if b.left < 0
                    || b.top < 0
                    || b.right > SCREEN_WIDTH as i32
                    || b.bottom > SCREEN_HEIGHT as i32
                {
                    return invalid(format!(
                        "screen {:?}: widget {:?} bounds {b} outside the {SCREEN_WIDTH}x{SCREEN_HEIGHT} screen",
                        def.id, w.widget_ref
                    ));
                }
                widgets.push(Widget {
                    widget_id,
                    bounds: b,
                    text: w.text.clone(),
                    resource_id: w.resource_id.clone(),
                    content_description: w.content_description.clone(),
                    enabled: w.enabled,
                    interactions: w.interactions.clone(),
                });
            }
            for a in &def.escape_actions {
                match def.widgets.iter().find(|w| w.widget_ref == a.widget) {
                    None => {
                        return invalid(format!(
                            "screen {:?}: escape action references unknown widget {:?}",
                            def.id, a.widget
                        ))
                    }
                    Some(w) if !w.interactions.contains(&a.interaction) => {
                        return invalid(format!(
                            "screen {:?}: widget {:?} does not support {}",
                            def.id, a.widget, a.interaction
                        ))
                    }
                    Some(_) => {}
                }
            }
            screens.push(Screen {
                def: def.clone(),
                widgets,
            });
        }
        let Some(&initial) = index.get(&scenario.initial) else {
            return invalid(format!(
                "initial screen {:?} does not exist",
                scenario.initial
            ));
        };

        let mut transitions = HashMap::new();
        for t in &scenario.transitions {
            let Some(&si) = index.get(&t.screen) else {
                return invalid(format!(
                    "transition references unknown screen {:?}",
                    t.screen
                ));
            };
            let Some(wi) = screens[si].widget_index(&t.widget) else {
                return invalid(format!(
                    "transition on screen {:?} references unknown widget {:?}",
                    t.screen, t.widget
                ));
            };
            if !screens[si].def.widgets[wi]
                .interactions
                .contains(&t.interaction)
            {
                return invalid(format!(
                    "transition on {:?}/{:?}: widget does not support {}",
                    t.screen, t.widget, t.interaction
                ));
            }
            let mut problem = None;
            t.effect.visit(&mut |e| {
                let (screens_ref, flag): (Vec<&str>, Option<&str>) = match e {
                    Effect::Goto { screen } | Effect::Replace { screen } => (vec![screen], None),
                    Effect::GuardedGoto {
                        flag,
                        then,
                        otherwise,
                    } => (vec![then, otherwise], Some(flag)),
                    Effect::SetFlag { flag }
                    | Effect::ClearFlag { flag }
                    | Effect::Guarded { flag, .. } => (vec![], Some(flag)),
                    Effect::Crash { signature } if signature.is_empty() => {
                        problem
                            .get_or_insert_with(|| "crash signature must be non-empty".to_string());
                        (vec![], None)
                    }
                    _ => (vec![], None),
                };
                for s in screens_ref {
                    if !index.contains_key(s) {
                        problem.get_or_insert_with(|| {
                            format!("effect references unknown screen {s:?}")
                        });
                    }
                }
                if let Some(f) = flag {
                    if !flags.contains(f) {
                        problem.get_or_insert_with(|| {
                            format!("effect references undeclared flag {f:?}")
                        });
                    }
                }
            });
            if let Some(p) = problem {
                return invalid(format!("transition on {:?}/{:?}: {p}", t.screen, t.widget));
            }
            if transitions
                .insert((si, wi, t.interaction), t.effect.clone())
                .is_some()
            {
                return invalid(format!(
                    "duplicate transition for {:?}/{:?}/{}",
                    t.screen, t.widget, t.interaction
                ));
            }
        }

        let canonical = serde_json::to_vec(&scenario)?;
        let fingerprint = Sha256::digest(&canonical)
            .iter()
            .take(8)
            .map(|b| format!("{b:02x}"))
            .collect();
        let model = Self {
            scenario,
            screens,
            index,
            initial,
            transitions,
            fingerprint,
        };
        render::calibrate(&model)?;
        Ok(model)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_scenario(Scenario::from_json(&text)?)
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn name(&self) -> &str {
        self.scenario.name.as_deref().unwrap_or("unnamed")
    }

    /// Short content hash identifying this app in reports.
    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    pub fn screens(&self) -> &[Screen] {
        &self.screens
    }

    pub fn screen(&self, index: usize) -> &Screen {
        &self.screens[index]
    }

    pub fn screen_index(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn screen_by_id(&self, id: &str) -> Option<&Screen> {
        self.screen_index(id).map(|i| &self.screens[i])
    }

    pub fn initial(&self) -> usize {
        self.initial
    }

    pub fn transition(
        &self,
        screen: usize,
        widget: usize,
        interaction: InteractionType,
    ) -> Option<&Effect> {
        self.transitions.get(&(screen, widget, interaction))
    }

    pub fn flag_names(&self) -> &[String] {
        &self.scenario.flags
    }
}

/// Loads and validates a scenario file.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<AppModel> {
    AppModel::load(path)
}
