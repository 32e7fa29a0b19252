//! Seeded benchmark apps.
//!
//! Screens form a navigation tree (each screen is opened by exactly one
//! event on its parent) with extra links back to earlier screens. Tarpit
//! screens dedicate `tarpit_factor` of their events to self-loops, leaving
//! a handful of exits among many inert actions.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::model::{
    ActionRef, AppModel, Effect, Scenario, ScreenDef, TransitionDef, WidgetDef,
};
use crate::ui::{InteractionType, Rect};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneratorParams {
    pub screens: usize,
    pub tarpit_factor: f64,
    pub seed: u64,
    /// Number of crash transitions; defaults to `screens / 5`.
    pub crashes: Option<usize>,
}

impl GeneratorParams {
    pub fn new(screens: usize, tarpit_factor: f64, seed: u64) -> Self {
        Self {
            screens,
            tarpit_factor,
            seed,
            crashes: None,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.screens < 2 {
            return Err(Error::InvalidConfig(format!(
                "need at least 2 screens, got {}",
                self.screens
            )));
        }
        if self.screens > crate::sim::render::MAX_VISUAL_GROUP as usize {
            return Err(Error::InvalidConfig(format!(
                "at most {} screens",
                crate::sim::render::MAX_VISUAL_GROUP
            )));
        }
        if !(0.0..1.0).contains(&self.tarpit_factor) {
            return Err(Error::InvalidConfig(format!(
                "tarpit factor {} outside [0, 1)",
                self.tarpit_factor
            )));
        }
        Ok(())
    }
}

/// Self-loop share at or above which a screen counts as a ground-truth tarpit.
pub const TARPIT_SELF_LOOP_SHARE: f64 = 0.5;
const NON_TARPIT_SELF_LOOP_CAP: f64 = 0.4;
const GRID_COLS: i32 = 3;
const GRID_TOP: i32 = 72;
const ROW_PITCH: i32 = 24;

struct Slot {
    widget: String,
    interaction: InteractionType,
}

struct Draft {
    def: ScreenDef,
    /// Assignable (non app-bar) events in linearized order.
    slots: Vec<Slot>,
    self_loop_share: f64,
}

fn draft_screen(i: usize, rng: &mut ChaCha8Rng, tarpit: bool, self_loop_share: f64) -> Draft {
    let count = if tarpit {
        rng.gen_range(14..=27)
    } else {
        rng.gen_range(6..=15)
    };
    let mut widgets = Vec::with_capacity(count + 1);
    let bar_interactions = if i == 0 {
        vec![InteractionType::Click]
    } else {
        vec![InteractionType::Click, InteractionType::Back]
    };
    widgets.push(WidgetDef {
        widget_ref: "app_bar".into(),
        widget_id: None,
        bounds: Rect::new(0, 40, 180, 66).unwrap(),
        text: None,
        resource_id: Some("app_bar".into()),
        content_description: Some(if i == 0 { "Menu" } else { "Navigate up" }.into()),
        enabled: true,
        interactions: bar_interactions,
    });
    let mut slots = Vec::new();
    for k in 0..count as i32 {
        let (row, col) = (k / GRID_COLS, k % GRID_COLS);
        let (left, top) = (4 + col * 58, GRID_TOP + row * ROW_PITCH);
        let interactions = match rng.gen_range(0..10) {
            0 => vec![InteractionType::Click],
            1 => vec![
                InteractionType::Click,
                InteractionType::LongClick,
                InteractionType::Scroll,
            ],
            2 => vec![InteractionType::TextInput],
            _ => vec![InteractionType::Click, InteractionType::LongClick],
        };
        let name = format!("w{k}");
        for &interaction in &interactions {
            slots.push(Slot {
                widget: name.clone(),
                interaction,
            });
        }
        widgets.push(WidgetDef {
            widget_ref: name,
            widget_id: None,
            bounds: Rect::new(left, top, left + 54, top + 20).unwrap(),
            text: Some(format!("S{i} item {k}")),
            resource_id: (k % 3 == 0).then(|| format!("s{i}_item_{k}")),
            content_description: None,
            enabled: true,
            interactions,
        });
    }
    Draft {
        def: ScreenDef {
            id: format!("s{i}"),
            visual_group: i as u32 + 1,
            render_salt: rng.gen(),
            tarpit: tarpit && self_loop_share >= TARPIT_SELF_LOOP_SHARE,
            widgets,
            escape_actions: Vec::new(),
        },
        slots,
        self_loop_share,
    }
}

/// Builds a random scenario. Identical parameters give identical output.
pub fn generate(params: &GeneratorParams) -> Result<Scenario> {
    params.validate()?;
    let n = params.screens;
    let f = params.tarpit_factor;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);

    let mut parent = vec![usize::MAX; n];
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); n];
    #[allow(clippy::needless_range_loop)]
    for i in 1..n {
        let p = rng.gen_range(i.saturating_sub(4)..i);
        parent[i] = p;
        children[p].push(i);
    }

    let mut drafts: Vec<Draft> = (0..n)
        .map(|i| {
            let designated = i > 0 && f > 0.0 && rng.gen_bool(0.5);
            let share = if designated {
                f
            } else {
                f.min(NON_TARPIT_SELF_LOOP_CAP)
            };
            draft_screen(i, &mut rng, designated, share)
        })
        .collect();

    // Lookalike pages: some non-tarpit leaves reuse their parent's visuals.
    #[allow(clippy::needless_range_loop)]
    for i in 1..n {
        let p = parent[i];
        if children[i].is_empty()
            && !drafts[i].def.tarpit
            && !drafts[p].def.tarpit
            && rng.gen_bool(0.1)
        {
            drafts[i].def.visual_group = drafts[p].def.visual_group;
        }
    }

    let mut transitions = Vec::new();
    let mut flags = Vec::new();
    let mut inert: Vec<Vec<usize>> = Vec::with_capacity(n);
    for i in 0..n {
        let draft = &drafts[i];
        let id = draft.def.id.clone();
        let total = draft.slots.len();
        let mut order: Vec<usize> = (0..total).collect();
        order.shuffle(&mut rng);
        let clickable: Vec<usize> = order
            .iter()
            .copied()
            .filter(|&s| draft.slots[s].interaction == InteractionType::Click)
            .collect();
        let mut used = vec![false; total];
        let mut escapes = Vec::new();

        let mut child_slots = Vec::new();
        for (&slot, &child) in clickable.iter().zip(&children[i]) {
            used[slot] = true;
            child_slots.push(slot);
            transitions.push(TransitionDef {
                screen: id.clone(),
                widget: draft.slots[slot].widget.clone(),
                interaction: InteractionType::Click,
                effect: Effect::Goto {
                    screen: format!("s{child}"),
                },
            });
        }
        // Children that found no click slot are reached from the app bar.
        if children[i].len() > child_slots.len() {
            let child = children[i][child_slots.len()];
            transitions.push(TransitionDef {
                screen: id.clone(),
                widget: "app_bar".into(),
                interaction: InteractionType::Click,
                effect: Effect::Goto {
                    screen: format!("s{child}"),
                },
            });
            escapes.push(ActionRef {
                widget: "app_bar".into(),
                interaction: InteractionType::Click,
            });
        }
        child_slots.sort_unstable();
        for &slot in &child_slots {
            escapes.push(ActionRef {
                widget: draft.slots[slot].widget.clone(),
                interaction: InteractionType::Click,
            });
        }

        let target_exits = ((1.0 - draft.self_loop_share) * total as f64).round() as usize;
        let extra = target_exits.saturating_sub(child_slots.len() + usize::from(i > 0));
        for &slot in order
            .iter()
            .filter(|&&s| !used[s])
            .take(extra)
            .collect::<Vec<_>>()
        {
            used[slot] = true;
            let effect = if i > 0 && rng.gen_bool(0.5) {
                Effect::BackPop
            } else {
                Effect::Goto {
                    screen: format!("s{}", rng.gen_range(0..=i.saturating_sub(1))),
                }
            };
            transitions.push(TransitionDef {
                screen: id.clone(),
                widget: draft.slots[slot].widget.clone(),
                interaction: draft.slots[slot].interaction,
                effect,
            });
        }
        if escapes.is_empty() && i > 0 {
            escapes.push(ActionRef {
                widget: "app_bar".into(),
                interaction: InteractionType::Back,
            });
        }
        drafts[i].def.escape_actions = escapes;
        inert.push(order.into_iter().filter(|&s| !used[s]).collect());
    }

    let crash_count = params.crashes.unwrap_or(n / 5);
    let candidates: Vec<usize> = (n / 3..n).filter(|&i| inert[i].len() > 1).collect();
    for k in 0..crash_count {
        let Some(&i) = candidates.choose(&mut rng) else {
            break;
        };
        let Some(slot) = inert[i].pop() else { continue };
        let id = drafts[i].def.id.clone();
        let signature = format!("GeneratedCrash-{k}@{id}");
        let slot_ref = &drafts[i].slots[slot];
        let stateful = rng.gen_bool(0.5) && !inert[parent[i]].is_empty();
        let effect = if stateful {
            let flag = format!("precondition_{k}");
            let setter = inert[parent[i]].pop().expect("checked non-empty");
            let setter_ref = &drafts[parent[i]].slots[setter];
            transitions.push(TransitionDef {
                screen: drafts[parent[i]].def.id.clone(),
                widget: setter_ref.widget.clone(),
                interaction: setter_ref.interaction,
                effect: Effect::SetFlag { flag: flag.clone() },
            });
            flags.push(flag.clone());
            Effect::Guarded {
                flag,
                then: Box::new(Effect::Crash { signature }),
                otherwise: Box::new(Effect::SelfLoop),
            }
        } else {
            Effect::Crash { signature }
        };
        transitions.push(TransitionDef {
            screen: id,
            widget: slot_ref.widget.clone(),
            interaction: slot_ref.interaction,
            effect,
        });
    }

    Ok(Scenario {
        name: Some(format!("generated-n{}-f{}-s{}", n, f, params.seed)),
        screens: drafts.into_iter().map(|d| d.def).collect(),
        initial: "s0".into(),
        transitions,
        flags,
    })
}

pub fn generate_app(params: &GeneratorParams) -> Result<AppModel> {
    AppModel::from_scenario(generate(params)?)
}
