//! Distance-based rigid formation control for double-integrator agents:
//! graph and rigidity tools, control laws with mismatch estimators, motion
//! parameter design, a fixed-step simulator and trajectory analysis.

pub mod analysis;
pub mod control;
pub mod error;
pub mod graph;
pub mod motion;
pub mod numlin;
pub mod output;
pub mod presets;
pub mod scenario;
pub mod sim;

pub use error::{Error, Result};
