//! Scenario-driven front end: `run`, `check` and `batch`.

pub mod commands;
pub mod report;
