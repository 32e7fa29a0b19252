//! Deterministic simulated device.

pub mod generate;
pub mod model;
pub mod motivating;
pub mod render;
pub mod runtime;

pub use generate::{generate, generate_app, GeneratorParams};
pub use model::{
    load_scenario, ActionRef, AppModel, Effect, Scenario, Screen, ScreenDef, TransitionDef,
    WidgetDef,
};
pub use motivating::{motivating_example, motivating_scenario};
pub use render::{render, render_restart, SCREEN_HEIGHT, SCREEN_WIDTH};
pub use runtime::{ScreenProbe, SimRuntime};
