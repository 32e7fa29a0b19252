//! Experiment runner and command-line front end.

pub mod cli;
pub mod experiments;
pub mod plot;
