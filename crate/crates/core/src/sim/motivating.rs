//! The podcast-app worked example: a preview page that traps random
//! exploration, and a crash that needs multi-select, subscribe, then back.
//!
//! * `a` feed list. "Select" enters multi-select mode; any podcast opens `b`.
//! * `b` preview, 33 widgets / 70 events. Exits: "Subscribe" (replaces `b`
//!   with `c`, arming the bug when multi-select is on) and the bottom bar's
//!   back (cancels multi-select, returns to `a`).
//! * `c` detail, 38 widgets / 80 events. Back crashes when armed, otherwise
//!   returns to `a`. Episodes open `d` and disarm.
//! * `d` episode page.

use crate::sim::model::{
    ActionRef, AppModel, Effect, Scenario, ScreenDef, TransitionDef, WidgetDef,
};
use crate::ui::{InteractionType, Rect};

pub const CRASH_SIGNATURE: &str = "NPE-like-7609";
pub const FLAG_MULTI_SELECT: &str = "multi_select";
pub const FLAG_ARMED: &str = "subscribed_in_multi_select";

use InteractionType::{Back, Click, LongClick};

fn rect(l: i32, t: i32, r: i32, b: i32) -> Rect {
    Rect::new(l, t, r, b).expect("static layout")
}

fn widget(
    widget_ref: &str,
    bounds: Rect,
    text: Option<&str>,
    interactions: &[InteractionType],
) -> WidgetDef {
    WidgetDef {
        widget_ref: widget_ref.into(),
        widget_id: None,
        bounds,
        text: text.map(Into::into),
        resource_id: None,
        content_description: None,
        enabled: true,
        interactions: interactions.to_vec(),
    }
}

fn toolbar(bounds: Rect, description: &str) -> WidgetDef {
    WidgetDef {
        resource_id: Some("toolbar".into()),
        content_description: Some(description.into()),
        ..widget("toolbar", bounds, None, &InteractionType::ALL)
    }
}

fn go(screen: &str) -> Effect {
    Effect::Goto {
        screen: screen.into(),
    }
}

fn transition(
    screen: &str,
    widget: &str,
    interaction: InteractionType,
    effect: Effect,
) -> TransitionDef {
    TransitionDef {
        screen: screen.into(),
        widget: widget.into(),
        interaction,
        effect,
    }
}

fn escape(widget: &str, interaction: InteractionType) -> ActionRef {
    ActionRef {
        widget: widget.into(),
        interaction,
    }
}

const PREVIEW_LABELS: [&str; 8] = [
    "Cover",
    "Title",
    "Author",
    "Subscribe",
    "Website",
    "Share",
    "Rating",
    "Info",
];

fn page_a() -> (ScreenDef, Vec<TransitionDef>) {
    let mut widgets = vec![WidgetDef {
        resource_id: Some("select_mode".into()),
        ..widget("select", rect(120, 44, 176, 68), Some("Select"), &[Click])
    }];
    let mut transitions = vec![transition(
        "a",
        "select",
        Click,
        Effect::SetFlag {
            flag: FLAG_MULTI_SELECT.into(),
        },
    )];
    for i in 0..8 {
        let name = format!("podcast_{i}");
        let top = 76 + i * 28;
        widgets.push(widget(
            &name,
            rect(8, top, 172, top + 24),
            Some(&format!("Podcast {}", i + 1)),
            &[Click, LongClick],
        ));
        transitions.push(transition("a", &name, Click, go("b")));
    }
    let screen = ScreenDef {
        id: "a".into(),
        visual_group: 1,
        render_salt: 11,
        tarpit: false,
        widgets,
        escape_actions: vec![escape("podcast_0", Click)],
    };
    (screen, transitions)
}

fn page_b() -> (ScreenDef, Vec<TransitionDef>) {
    let mut widgets = Vec::new();
    for k in 0..32 {
        let (row, col) = (k / 4, k % 4);
        let (left, top) = (4 + col * 44, 44 + row * 30);
        let bounds = rect(left, top, left + 40, top + 26);
        if row == 0 {
            let label = PREVIEW_LABELS[col as usize];
            let mut w = widget(
                &label.to_lowercase(),
                bounds,
                Some(label),
                &[Click, LongClick],
            );
            if label == "Subscribe" {
                w.resource_id = Some("subscribe_button".into());
            }
            widgets.push(w);
        } else if row == 1 {
            let label = PREVIEW_LABELS[4 + col as usize];
            widgets.push(widget(
                &label.to_lowercase(),
                bounds,
                Some(label),
                &[Click, LongClick],
            ));
        } else {
            let n = k - 7;
            widgets.push(widget(
                &format!("episode_{n}"),
                bounds,
                Some(&format!("Episode {n}")),
                &[Click, LongClick],
            ));
        }
    }
    widgets.push(toolbar(rect(0, 288, 180, 320), "Navigate up"));
    let transitions = vec![
        transition(
            "b",
            "subscribe",
            Click,
            Effect::Guarded {
                flag: FLAG_MULTI_SELECT.into(),
                then: Box::new(Effect::Seq {
                    steps: vec![
                        Effect::SetFlag {
                            flag: FLAG_ARMED.into(),
                        },
                        Effect::Replace { screen: "c".into() },
                    ],
                }),
                otherwise: Box::new(Effect::Replace { screen: "c".into() }),
            },
        ),
        transition(
            "b",
            "toolbar",
            Back,
            Effect::Seq {
                steps: vec![
                    Effect::ClearFlag {
                        flag: FLAG_MULTI_SELECT.into(),
                    },
                    Effect::BackPop,
                ],
            },
        ),
    ];
    let screen = ScreenDef {
        id: "b".into(),
        visual_group: 2,
        render_salt: 22,
        tarpit: true,
        widgets,
        escape_actions: vec![escape("subscribe", Click), escape("toolbar", Back)],
    };
    (screen, transitions)
}

fn page_c() -> (ScreenDef, Vec<TransitionDef>) {
    let mut widgets = vec![toolbar(rect(0, 40, 180, 64), "Navigate up")];
    let mut transitions = Vec::new();
    for k in 0..37 {
        let (row, col) = (k / 4, k % 4);
        let (left, top) = (4 + col * 44, 68 + row * 25);
        let bounds = rect(left, top, left + 40, top + 21);
        if k < 4 {
            let name = format!("episode_{k}");
            widgets.push(widget(
                &name,
                bounds,
                Some(&format!("Episode {}", k + 1)),
                &[Click, LongClick],
            ));
            transitions.push(transition(
                "c",
                &name,
                Click,
                Effect::Seq {
                    steps: vec![
                        Effect::ClearFlag {
                            flag: FLAG_ARMED.into(),
                        },
                        go("d"),
                    ],
                },
            ));
        } else {
            widgets.push(widget(
                &format!("item_{k}"),
                bounds,
                Some(&format!("Item {k}")),
                &[Click, LongClick],
            ));
        }
    }
    transitions.push(transition(
        "c",
        "toolbar",
        Back,
        Effect::Guarded {
            flag: FLAG_ARMED.into(),
            then: Box::new(Effect::Crash {
                signature: CRASH_SIGNATURE.into(),
            }),
            otherwise: Box::new(Effect::Seq {
                steps: vec![
                    Effect::ClearFlag {
                        flag: FLAG_MULTI_SELECT.into(),
                    },
                    Effect::BackPop,
                ],
            }),
        },
    ));
    let screen = ScreenDef {
        id: "c".into(),
        visual_group: 3,
        render_salt: 33,
        tarpit: true,
        widgets,
        escape_actions: vec![escape("toolbar", Back), escape("episode_0", Click)],
    };
    (screen, transitions)
}

fn page_d() -> (ScreenDef, Vec<TransitionDef>) {
    let mut widgets = vec![WidgetDef {
        content_description: Some("Navigate up".into()),
        ..widget("up", rect(0, 40, 40, 64), None, &[Click, Back])
    }];
    for (i, label) in ["Play", "Download", "Mark played", "Share", "Notes"]
        .iter()
        .enumerate()
    {
        let top = 72 + i as i32 * 36;
        widgets.push(widget(
            &label.to_lowercase().replace(' ', "_"),
            rect(8, top, 172, top + 30),
            Some(label),
            &[Click, LongClick],
        ));
    }
    let transitions = vec![transition("d", "up", Click, Effect::BackPop)];
    let screen = ScreenDef {
        id: "d".into(),
        visual_group: 4,
        render_salt: 44,
        tarpit: false,
        widgets,
        escape_actions: vec![escape("up", Back)],
    };
    (screen, transitions)
}

pub fn motivating_scenario() -> Scenario {
    let mut screens = Vec::new();
    let mut transitions = Vec::new();
    for (screen, ts) in [page_a(), page_b(), page_c(), page_d()] {
        screens.push(screen);
        transitions.extend(ts);
    }
    Scenario {
        name: Some("motivating".into()),
        screens,
        initial: "a".into(),
        transitions,
        flags: vec![FLAG_MULTI_SELECT.into(), FLAG_ARMED.into()],
    }
}

/// The four-page podcast example as a validated model.
pub fn motivating_example() -> AppModel {
    AppModel::from_scenario(motivating_scenario()).expect("built-in scenario is valid")
}
