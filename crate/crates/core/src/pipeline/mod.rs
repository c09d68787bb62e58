//! End-to-end orchestration: configuration, per-stage transforms and the
//! resumable runner.
mod config;
mod run;
mod stages;

pub use config::*;
pub use run::*;
pub use stages::*;
