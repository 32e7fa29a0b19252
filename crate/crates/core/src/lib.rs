//! Hybrid GUI exploration: random event generation that hands control to an
//! advisor when exploration gets stuck on visually identical screens.
//!
//! The engine (`detector`, `memory`, `escape`, `driver`) only sees
//! [`ui::UiState`] observations through the [`device::Device`] trait. The
//! [`sim`] module provides a deterministic simulated app to drive it offline.

pub mod advisor;
pub mod detector;
pub mod device;
pub mod driver;
pub mod error;
pub mod escape;
pub mod harness;
pub mod memory;
pub mod phash;
pub mod sim;
pub mod ui;

pub use error::{Error, Result};
