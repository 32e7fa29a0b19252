//! The app-under-test boundary the engine drives.

use serde::{Deserialize, Serialize};

use crate::ui::{UiEvent, UiState};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CrashRecord {
    pub signature: String,
    pub event_index: u64,
    pub screen_id: String,
}

/// Result of executing one event. On a crash `state` is the restart state.
#[derive(Debug, Clone)]
pub struct StepResult {
    pub state: UiState,
    pub crash: Option<CrashRecord>,
}

pub trait Device {
    /// Captures the current screen.
    fn observe(&mut self) -> UiState;

    /// Executes one event and captures the resulting screen. Restarts the
    /// app after a crash.
    fn execute(&mut self, event: &UiEvent) -> StepResult;
}
