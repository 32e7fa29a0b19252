use std::collections::{BTreeSet, HashMap};
use std::sync::{Arc, Mutex};

use crate::device::{CrashRecord, Device, StepResult};
use crate::phash::Bitmap;
use crate::sim::model::{AppModel, Effect};
use crate::sim::render::{self, FRAME_PERIOD};
use crate::ui::{get_valid_widgets, InteractionType, UiEvent, UiState, Widget};

/// Ground-truth view of the runtime's current screen, for harness wiring
/// (oracle advisors). The engine never holds one.
#[derive(Debug, Clone, Default)]
pub struct ScreenProbe(Arc<Mutex<String>>);

impl ScreenProbe {
    pub fn current(&self) -> String {
        self.0.lock().expect("probe lock").clone()
    }

    fn set(&self, id: &str) {
        let mut guard = self.0.lock().expect("probe lock");
        guard.clear();
        guard.push_str(id);
    }
}

/// One running instance of an [`AppModel`].
pub struct SimRuntime {
    model: Arc<AppModel>,
    current: usize,
    stack: Vec<usize>,
    flags: BTreeSet<String>,
    frame: u64,
    events: u64,
    restarted: bool,
    crash_log: Vec<CrashRecord>,
    widgets: Vec<Arc<Vec<Widget>>>,
    /// Per screen: indices (into the screen's widgets) that survive occlusion filtering.
    valid: Vec<Vec<usize>>,
    renders: HashMap<(usize, u64), Arc<Bitmap>>,
    restart_renders: HashMap<u64, Arc<Bitmap>>,
    probe: ScreenProbe,
}

impl SimRuntime {
    pub fn new(model: Arc<AppModel>) -> Self {
        let widgets: Vec<_> = model
            .screens()
            .iter()
            .map(|s| Arc::new(s.widgets.clone()))
            .collect();
        let valid = model
            .screens()
            .iter()
            .map(|s| {
                let survivors = get_valid_widgets(&s.widgets);
                s.widgets
                    .iter()
                    .enumerate()
                    .filter(|(_, w)| survivors.iter().any(|v| v.widget_id == w.widget_id))
                    .map(|(i, _)| i)
                    .collect()
            })
            .collect();
        let initial = model.initial();
        let rt = Self {
            current: initial,
            stack: Vec::new(),
            flags: BTreeSet::new(),
            frame: 0,
            events: 0,
            restarted: false,
            crash_log: Vec::new(),
            widgets,
            valid,
            renders: HashMap::new(),
            restart_renders: HashMap::new(),
            probe: ScreenProbe::default(),
            model,
        };
        rt.probe.set(rt.model.screen(initial).id());
        rt
    }

    pub fn model(&self) -> &Arc<AppModel> {
        &self.model
    }

    pub fn probe(&self) -> ScreenProbe {
        self.probe.clone()
    }

    pub fn current_screen(&self) -> &str {
        self.model.screen(self.current).id()
    }

    pub fn flags(&self) -> &BTreeSet<String> {
        &self.flags
    }

    pub fn crash_log(&self) -> &[CrashRecord] {
        &self.crash_log
    }

    pub fn events_executed(&self) -> u64 {
        self.events
    }

    pub fn frame(&self) -> u64 {
        self.frame
    }

    /// Places the app on `screen` with the given flags, as if navigated
    /// there from the initial screen. Unknown ids are ignored.
    pub fn reset_to(&mut self, screen: &str, flags: &[&str]) {
        let Some(target) = self.model.screen_index(screen) else {
            return;
        };
        self.current = target;
        self.stack.clear();
        if target != self.model.initial() {
            self.stack.push(self.model.initial());
        }
        self.flags = flags.iter().map(|f| f.to_string()).collect();
        self.restarted = false;
        self.probe.set(self.model.screen(target).id());
    }

    fn screenshot(&mut self) -> Arc<Bitmap> {
        let phase = self.frame % FRAME_PERIOD;
        if self.restarted {
            let initial = self.model.screen(self.model.initial());
            self.restart_renders
                .entry(phase)
                .or_insert_with(|| Arc::new(render::render_restart(initial, phase)))
                .clone()
        } else {
            let screen = self.model.screen(self.current);
            self.renders
                .entry((self.current, phase))
                .or_insert_with(|| Arc::new(render::render(screen, phase)))
                .clone()
        }
    }

    fn resolve(&self, event: &UiEvent) -> Effect {
        let screen = self.current;
        let widgets = &self.model.screen(screen).widgets;
        let matched = self.valid[screen].iter().copied().find(|&i| {
            let w = &widgets[i];
            w.interactions.contains(&event.kind)
                && (event.kind == InteractionType::Back || w.bounds == event.bounds)
        });
        match matched {
            Some(wi) => self
                .model
                .transition(screen, wi, event.kind)
                .cloned()
                .unwrap_or(default_effect(event.kind)),
            None => default_effect(event.kind),
        }
    }

    /// Applies an effect; returns a crash signature if one fired.
    fn apply(&mut self, effect: &Effect) -> Option<String> {
        match effect {
            Effect::Goto { screen } => {
                self.stack.push(self.current);
                self.current = self.index(screen);
            }
            Effect::Replace { screen } => self.current = self.index(screen),
            Effect::SelfLoop => {}
            Effect::Crash { signature } => return Some(signature.clone()),
            Effect::BackPop => {
                if let Some(prev) = self.stack.pop() {
                    self.current = prev;
                }
            }
            Effect::SetFlag { flag } => {
                self.flags.insert(flag.clone());
            }
            Effect::ClearFlag { flag } => {
                self.flags.remove(flag);
            }
            Effect::GuardedGoto {
                flag,
                then,
                otherwise,
            } => {
                let target = if self.flags.contains(flag) {
                    then
                } else {
                    otherwise
                };
                self.stack.push(self.current);
                self.current = self.index(target);
            }
            Effect::Guarded {
                flag,
                then,
                otherwise,
            } => {
                let branch = if self.flags.contains(flag) {
                    then
                } else {
                    otherwise
                };
                return self.apply(branch);
            }
            Effect::Seq { steps } => {
                for step in steps {
                    if let Some(sig) = self.apply(step) {
                        return Some(sig);
                    }
                }
            }
        }
        None
    }

    fn index(&self, id: &str) -> usize {
        self.model
            .screen_index(id)
            .expect("validated screen reference")
    }
}

fn default_effect(kind: InteractionType) -> Effect {
    if kind == InteractionType::Back {
        Effect::BackPop
    } else {
        Effect::SelfLoop
    }
}

impl Device for SimRuntime {
    fn observe(&mut self) -> UiState {
        let screenshot = self.screenshot();
        UiState {
            screenshot,
            widgets: self.widgets[self.current].clone(),
            true_screen_id: self.model.screen(self.current).id().to_string(),
        }
    }

    fn execute(&mut self, event: &UiEvent) -> StepResult {
        let event_index = self.events;
        self.events += 1;
        self.frame += 1;
        self.restarted = false;
        let effect = self.resolve(event);
        let crash = self.apply(&effect).map(|signature| {
            let record = CrashRecord {
                signature,
                event_index,
                screen_id: self.model.screen(self.current).id().to_string(),
            };
            self.crash_log.push(record.clone());
            self.current = self.model.initial();
            self.stack.clear();
            self.flags.clear();
            self.restarted = true;
            record
        });
        self.probe.set(self.model.screen(self.current).id());
        StepResult {
            state: self.observe(),
            crash,
        }
    }
}
